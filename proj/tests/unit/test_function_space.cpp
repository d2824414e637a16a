#include <cmath>
#include <numbers>
#include <random>

#include "doctest.h"

#include "sgflm/function_space.hpp"

using namespace sgflm;

namespace {

// Reference integral of f*g over [0, 1] from composite Simpson on 10^4 intervals.
template <class F, class G>
double fine_integral(F&& f, G&& g)
{
    constexpr int n = 10000;
    const double h = 1.0 / n;
    double s = f(0.0) * g(0.0) + f(1.0) * g(1.0);
    for (int k = 1; k < n; ++k) {
        const double t = k * h;
        s += (k % 2 ? 4.0 : 2.0) * f(t) * g(t);
    }
    return s * h / 3.0;
}

double trig(int j, double t)
{
    // j is 1-based
    if (j == 1)
        return 1.0;
    const int k = j / 2;
    const double a = 2.0 * std::numbers::pi * k * t;
    return std::sqrt(2.0) * (j % 2 == 0 ? std::cos(a) : std::sin(a));
}

} // namespace

TEST_CASE("uniform grid spans [0, 1] inclusively")
{
    const Eigen::VectorXd t = uniform_grid(50);
    CHECK(t.size() == 50);
    CHECK(t[0] == 0.0);
    CHECK(t[49] == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(t[1] - t[0] == doctest::Approx(1.0 / 49.0));
}

TEST_CASE("grid validation")
{
    Eigen::VectorXd t = uniform_grid(10);
    CHECK_NOTHROW(validate_grid(t));
    t[3] += 1e-6;
    CHECK_THROWS_AS(validate_grid(t), std::invalid_argument);
    CHECK_THROWS_AS(validate_grid(Eigen::VectorXd::LinSpaced(5, 0.0, 2.0)), std::invalid_argument);
    CHECK_THROWS(validate_grid(Eigen::VectorXd::Zero(1)));
}

TEST_CASE("trapezoid weights sum to one and integrate linear functions exactly")
{
    const Eigen::VectorXd t = uniform_grid(50);
    const Eigen::VectorXd w = trapezoid_weights(t);
    CHECK(w.sum() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(w.dot(t) == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("basis values match the closed-form trigonometric functions")
{
    const Eigen::VectorXd t = uniform_grid(50);
    const BasisSet basis = make_trig_basis(20, t);
    for (int j = 0; j < 20; ++j)
        for (int k = 0; k < t.size(); ++k)
            CHECK(basis.matrix()(k, j) == doctest::Approx(trig(j + 1, t[k])).epsilon(1e-13));
    CHECK_THROWS(make_trig_basis(30, t)); // needs at least 2J+1 points
}

TEST_CASE("Gram matrix of the 20-function basis is the identity")
{
    const BasisSet basis = make_trig_basis(20, uniform_grid(50));
    const Eigen::MatrixXd g = basis.gram();
    CHECK((g - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-4);
    // trapezoid on a full period is exact for these frequencies
    CHECK((g - Eigen::MatrixXd::Identity(20, 20)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("Gram of the continuous basis from fine quadrature is the identity")
{
    for (int i = 1; i <= 6; ++i)
        for (int j = 1; j <= 6; ++j) {
            const double v = fine_integral([&](double t) { return trig(i, t); },
                                           [&](double t) { return trig(j, t); });
            CHECK(v == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
        }
}

TEST_CASE("quadrature inner product against fine-grid reference")
{
    const Eigen::VectorXd t = uniform_grid(50);
    const auto f = [](double s) { return 4.0 * s * std::sin(3.0 * s); };
    const auto g = [](double s) { return std::exp(-s); };
    const double ref = fine_integral(f, g);
    const double approx = quad_inner_product(FunctionGrid::sample(t, f), FunctionGrid::sample(t, g));
    // trapezoid error bound for h = 1/49 and these curvatures
    CHECK(std::abs(approx - ref) < 2e-3);

    // finer grid converges at second order
    const Eigen::VectorXd t2 = uniform_grid(491);
    const double approx2 = quad_inner_product(FunctionGrid::sample(t2, f), FunctionGrid::sample(t2, g));
    CHECK(std::abs(approx2 - ref) < std::abs(approx - ref) / 50.0);
}

TEST_CASE("mismatched grids are rejected")
{
    const FunctionGrid a = FunctionGrid::sample(uniform_grid(50), [](double) { return 1.0; });
    const FunctionGrid b = FunctionGrid::sample(uniform_grid(40), [](double) { return 1.0; });
    CHECK_THROWS(quad_inner_product(a, b));
    CHECK_THROWS(FunctionGrid(uniform_grid(5), Eigen::VectorXd::Zero(4)));
}

TEST_CASE("projection recovers coefficients of an in-span curve and reconstruct inverts it")
{
    const BasisSet basis = make_trig_basis(20, uniform_grid(50));
    std::mt19937_64 rng(3);
    std::normal_distribution<double> z;
    Eigen::VectorXd c(20);
    for (int j = 0; j < 20; ++j)
        c[j] = z(rng);
    const FunctionGrid x = reconstruct(c, basis);
    const ScoreVector back = project(x, basis);
    CHECK((back - c).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((reconstruct(back, basis).values() - x.values()).cwiseAbs().maxCoeff() < 1e-10);

    // a short coefficient vector uses the leading functions
    const FunctionGrid y = reconstruct(c.head(3), basis);
    const ScoreVector yb = project(y, basis);
    CHECK((yb.head(3) - c.head(3)).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(yb.tail(17).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("row projection agrees with single-curve projection")
{
    const Eigen::VectorXd t = uniform_grid(50);
    const BasisSet basis = make_trig_basis(7, t);
    std::mt19937_64 rng(9);
    std::normal_distribution<double> z;
    Eigen::MatrixXd curves(4, 50);
    for (int r = 0; r < 4; ++r)
        for (int k = 0; k < 50; ++k)
            curves(r, k) = z(rng);
    const Eigen::MatrixXd s = project_rows(curves, basis);
    for (int r = 0; r < 4; ++r) {
        const ScoreVector one = project(FunctionGrid(t, curves.row(r).transpose()), basis);
        CHECK((s.row(r).transpose() - one).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("centering removes the sample mean curve")
{
    const Eigen::VectorXd t = uniform_grid(50);
    std::vector<FunctionGrid> curves;
    for (int i = 0; i < 5; ++i)
        curves.push_back(FunctionGrid::sample(t, [i](double s) { return i * s + std::cos(s); }));
    const CenteredCovariates cc = center_covariates(curves);
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(50);
    for (const auto& c : cc.centered)
        sum += c.values();
    CHECK(sum.cwiseAbs().maxCoeff() < 1e-12);
    CHECK(cc.mean.values()[49] == doctest::Approx(2.0 + std::cos(1.0)));
    CHECK_THROWS(center_covariates({}));
}
