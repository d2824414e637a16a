#include <cmath>
#include <random>

#include "doctest.h"

#include "helpers.hpp"
#include "sgflm/errors.hpp"
#include "sgflm/model.hpp"

using namespace sgflm;

namespace {

// Direct site-by-site evaluation used as an oracle.
double oracle_loglik(const Theta& th, const Dataset& d)
{
    const int n = d.num_sites();
    std::vector<double> k(n);
    for (int i = 0; i < n; ++i) {
        double l = th.alpha;
        for (int j = 0; j < th.p(); ++j)
            l += th.beta[j] * d.scores(i, j);
        k[i] = 1.0 / (1.0 + std::exp(-l));
    }
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        double a = std::log(k[i] / (1.0 - k[i]));
        for (int j : d.lattice.neighbors(i))
            a += th.eta * (d.responses[j] - k[j]);
        s += a * d.responses[i] - std::log(1.0 + std::exp(a));
    }
    return s;
}

Theta random_theta(std::mt19937_64& rng, int p)
{
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    Theta th{1.5 * u(rng), u(rng), Eigen::VectorXd(p)};
    for (int j = 0; j < p; ++j)
        th.beta[j] = u(rng);
    return th;
}

} // namespace

TEST_CASE("logistic and log1p_exp are stable in the tails")
{
    CHECK(logistic(0.0) == 0.5);
    CHECK(logistic(800.0) == 1.0);
    CHECK(logistic(-800.0) >= 0.0);
    CHECK(logistic(-800.0) < 1e-300);
    CHECK(log1p_exp(800.0) == doctest::Approx(800.0));
    CHECK(log1p_exp(-800.0) >= 0.0);
    CHECK(log1p_exp(0.0) == doctest::Approx(std::log(2.0)));
    CHECK(log1p_exp(-40.0) == doctest::Approx(std::exp(-40.0)).epsilon(1e-12));
}

TEST_CASE("theta vector round trip and validation")
{
    const Theta th{0.4, -0.2, Eigen::Vector3d(1.0, 2.0, 3.0)};
    const Eigen::VectorXd v = th.to_vector();
    CHECK(v.size() == 5);
    CHECK(v[0] == 0.4);
    CHECK(v[1] == -0.2);
    const Theta back = Theta::from_vector(v);
    CHECK(back.eta == 0.4);
    CHECK(back.beta == th.beta);
    CHECK(th.regression_vector().size() == 4);
    CHECK(th.regression_vector()[0] == -0.2);
    CHECK_NOTHROW(check_theta(th));
    CHECK_THROWS(check_theta(Theta{2.5, 0.0, Eigen::VectorXd::Zero(1)}));
    CHECK_THROWS(check_theta(Theta{0.0, NAN, Eigen::VectorXd::Zero(1)}));
}

TEST_CASE("natural parameter and conditional probability from the definition")
{
    auto data = testing::random_datasets(1, 3, 4, 2, 11);
    const Dataset& d = data.front();
    const Theta th{0.7, 0.3, Eigen::Vector2d(0.5, -1.0)};
    for (int i = 0; i < d.num_sites(); ++i) {
        double a = th.alpha + th.beta.dot(d.scores.row(i).head(2).transpose());
        for (int j : d.lattice.neighbors(i))
            a += th.eta * (d.responses[j] - kappa(th, d.scores.row(j).transpose()));
        CHECK(natural_parameter(th, d, i) == doctest::Approx(a).epsilon(1e-14));
        CHECK(conditional_probability(th, d, i) == doctest::Approx(1.0 / (1.0 + std::exp(-a))).epsilon(1e-14));
    }
    const Eigen::VectorXd all = natural_parameters(th, d);
    for (int i = 0; i < d.num_sites(); ++i)
        CHECK(all[i] == doctest::Approx(natural_parameter(th, d, i)).epsilon(1e-14));
}

TEST_CASE("kappa ignores the spatial term")
{
    const Theta th{1.0, 0.0, Eigen::VectorXd::Zero(2)};
    CHECK(kappa(th, Eigen::Vector2d(3.0, 4.0)) == 0.5);
}

TEST_CASE("composite log-likelihood matches direct evaluation")
{
    std::mt19937_64 rng(5);
    auto data = testing::random_datasets(10, 4, 5, 4, 5);
    for (const auto& d : data) {
        const Theta th = random_theta(rng, 3);
        CHECK(composite_loglik(th, d) == doctest::Approx(oracle_loglik(th, d)).epsilon(1e-12));
    }
}

TEST_CASE("at eta = 0 the composite likelihood is the logistic likelihood")
{
    auto data = testing::random_datasets(1, 5, 5, 2, 8);
    const Dataset& d = data.front();
    const Theta th{0.0, 0.2, Eigen::Vector2d(-0.3, 0.9)};
    double ll = 0.0;
    for (int i = 0; i < d.num_sites(); ++i) {
        const double l = th.alpha + th.beta.dot(d.scores.row(i).head(2).transpose());
        const double pi = 1.0 / (1.0 + std::exp(-l));
        ll += d.responses[i] * std::log(pi) + (1.0 - d.responses[i]) * std::log(1.0 - pi);
    }
    CHECK(composite_loglik(th, d) == doctest::Approx(ll).epsilon(1e-12));
}

TEST_CASE("analytic gradient and Hessian agree with finite differences")
{
    std::mt19937_64 rng(21);
    auto data = testing::random_datasets(15, 4, 4, 3, 21);
    for (const auto& d : data) {
        const Theta th = random_theta(rng, 3);
        const CLDerivatives der = composite_loglik_derivatives(th, d);
        CHECK(der.value == doctest::Approx(composite_loglik(th, d)).epsilon(1e-13));
        CHECK((der.hessian - der.hessian.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        const Eigen::VectorXd v = th.to_vector();
        for (int k = 0; k < v.size(); ++k) {
            const double h = 1e-5;
            Eigen::VectorXd up = v, dn = v;
            up[k] += h;
            dn[k] -= h;
            const Theta tu = Theta::from_vector(up), td = Theta::from_vector(dn);
            const double fd = (composite_loglik(tu, d) - composite_loglik(td, d)) / (2 * h);
            CHECK(der.gradient[k] == doctest::Approx(fd).epsilon(1e-6));
            const Eigen::VectorXd hd = (composite_loglik_derivatives(tu, d).gradient
                                        - composite_loglik_derivatives(td, d).gradient) / (2 * h);
            for (int l = 0; l < v.size(); ++l)
                CHECK(der.hessian(l, k) == doctest::Approx(hd[l]).epsilon(1e-5).scale(1.0));
        }
    }
}

TEST_CASE("totals sum replicate contributions")
{
    auto data = testing::random_datasets(3, 3, 3, 2, 4);
    const Theta th{0.5, 0.1, Eigen::Vector2d(0.2, 0.3)};
    double s = 0.0;
    for (const auto& d : data)
        s += composite_loglik(th, d);
    CHECK(total_loglik(th, data) == doctest::Approx(s).epsilon(1e-14));
    const CLDerivatives t = total_derivatives(th, data);
    CHECK(t.value == doctest::Approx(s).epsilon(1e-14));
    Eigen::VectorXd g = Eigen::VectorXd::Zero(4);
    for (const auto& d : data)
        g += composite_loglik_derivatives(th, d).gradient;
    CHECK((t.gradient - g).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("dataset validation")
{
    auto data = testing::random_datasets(1, 3, 3, 2, 1);
    Dataset d = data.front();
    CHECK_NOTHROW(d.validate());
    d.responses[0] = 0.5;
    CHECK_THROWS_AS(d.validate(), DataError);
    d = data.front();
    d.scores(2, 1) = NAN;
    CHECK_THROWS_AS(d.validate(), DataError);
    d = data.front();
    d.responses.conservativeResize(8);
    CHECK_THROWS_AS(d.validate(), DataError);
}

TEST_CASE("p larger than stored scores is rejected")
{
    auto data = testing::random_datasets(1, 3, 3, 2, 1);
    const Theta th{0.0, 0.0, Eigen::VectorXd::Zero(3)};
    CHECK_THROWS(composite_loglik(th, data.front()));
}
