#include "sgflm/function_space.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

namespace sgflm {

namespace {

constexpr double kSpacingTol = 1e-12;

} // namespace

Eigen::VectorXd uniform_grid(int num_points)
{
    if (num_points < 2)
        throw std::invalid_argument("uniform_grid: need at least 2 points");
    return Eigen::VectorXd::LinSpaced(num_points, 0.0, 1.0);
}

void validate_grid(const Eigen::VectorXd& t)
{
    const Eigen::Index n = t.size();
    if (n < 2)
        throw std::invalid_argument("grid must have at least 2 points");
    if (t[0] < -kSpacingTol || t[n - 1] > 1.0 + kSpacingTol)
        throw std::invalid_argument("grid points must lie in [0,1]");
    const double h = (t[n - 1] - t[0]) / static_cast<double>(n - 1);
    if (!(h > 0.0))
        throw std::invalid_argument("grid must be strictly increasing");
    for (Eigen::Index k = 1; k < n; ++k) {
        const double step = t[k] - t[k - 1];
        if (!(step > 0.0) || std::abs(step - h) > kSpacingTol * h)
            throw std::invalid_argument("grid must be uniform (step " + std::to_string(k) + ")");
    }
}

Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& t)
{
    const Eigen::Index n = t.size();
    const double h = (t[n - 1] - t[0]) / static_cast<double>(n - 1);
    Eigen::VectorXd w = Eigen::VectorXd::Constant(n, h);
    w[0] *= 0.5;
    w[n - 1] *= 0.5;
    return w;
}

FunctionGrid::FunctionGrid(Eigen::VectorXd grid_points, Eigen::VectorXd values)
    : t_(std::move(grid_points)), values_(std::move(values))
{
    if (t_.size() != values_.size())
        throw std::invalid_argument("FunctionGrid: grid and values differ in length");
    validate_grid(t_);
}

bool FunctionGrid::same_grid(const FunctionGrid& other) const
{
    return t_.size() == other.t_.size()
        && (t_ - other.t_).cwiseAbs().maxCoeff() <= kSpacingTol;
}

BasisSet::BasisSet(Eigen::VectorXd grid_points, Eigen::MatrixXd values)
    : t_(std::move(grid_points)), phi_(std::move(values))
{
    validate_grid(t_);
    if (phi_.rows() != t_.size() || phi_.cols() < 1)
        throw std::invalid_argument("BasisSet: value matrix does not match grid");
    w_ = trapezoid_weights(t_);
}

FunctionGrid BasisSet::function(int j) const
{
    if (j < 0 || j >= num_functions())
        throw std::out_of_range("BasisSet::function: index out of range");
    return FunctionGrid(t_, phi_.col(j));
}

Eigen::MatrixXd BasisSet::gram() const
{
    return phi_.transpose() * w_.asDiagonal() * phi_;
}

BasisSet make_trig_basis(int num_functions, const Eigen::VectorXd& grid_points)
{
    if (num_functions < 1)
        throw std::invalid_argument("make_trig_basis: need at least one function");
    if (grid_points.size() < 2 * num_functions + 1)
        throw std::invalid_argument("make_trig_basis: grid too coarse for "
                                    + std::to_string(num_functions) + " functions");
    validate_grid(grid_points);

    const double two_pi = 2.0 * std::numbers::pi;
    Eigen::MatrixXd phi(grid_points.size(), num_functions);
    for (int j = 0; j < num_functions; ++j) {
        // j = 0 -> constant; odd j -> cos, even j -> sin, frequency (j+1)/2
        const int k = (j + 1) / 2;
        for (Eigen::Index r = 0; r < grid_points.size(); ++r) {
            const double t = grid_points[r];
            if (j == 0)
                phi(r, j) = 1.0;
            else if (j % 2 == 1)
                phi(r, j) = std::numbers::sqrt2 * std::cos(two_pi * k * t);
            else
                phi(r, j) = std::numbers::sqrt2 * std::sin(two_pi * k * t);
        }
    }
    return BasisSet(grid_points, std::move(phi));
}

double quad_inner_product(const FunctionGrid& f, const FunctionGrid& g)
{
    if (!f.same_grid(g))
        throw std::invalid_argument("quad_inner_product: functions live on different grids");
    const Eigen::VectorXd w = trapezoid_weights(f.grid_points());
    return (w.array() * f.values().array() * g.values().array()).sum();
}

ScoreVector project(const FunctionGrid& x, const BasisSet& basis)
{
    if (x.size() != basis.grid_points().size()
        || (x.grid_points() - basis.grid_points()).cwiseAbs().maxCoeff() > kSpacingTol)
        throw std::invalid_argument("project: curve and basis live on different grids");
    return basis.matrix().transpose() * (basis.weights().array() * x.values().array()).matrix();
}

Eigen::MatrixXd project_rows(const Eigen::MatrixXd& curves, const BasisSet& basis)
{
    if (curves.cols() != basis.grid_points().size())
        throw std::invalid_argument("project_rows: curve length does not match basis grid");
    return curves * (basis.weights().asDiagonal() * basis.matrix());
}

FunctionGrid reconstruct(const ScoreVector& coeffs, const BasisSet& basis)
{
    if (coeffs.size() > basis.num_functions())
        throw std::invalid_argument("reconstruct: more coefficients than basis functions");
    Eigen::VectorXd v = Eigen::VectorXd::Zero(basis.grid_points().size());
    if (coeffs.size() > 0)
        v = basis.matrix().leftCols(coeffs.size()) * coeffs;
    return FunctionGrid(basis.grid_points(), std::move(v));
}

CenteredCovariates center_covariates(const std::vector<FunctionGrid>& curves)
{
    if (curves.empty())
        throw std::invalid_argument("center_covariates: empty list");
    const FunctionGrid& first = curves.front();
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(first.size());
    for (const auto& c : curves) {
        if (!c.same_grid(first))
            throw std::invalid_argument("center_covariates: curves live on different grids");
        mean += c.values();
    }
    mean /= static_cast<double>(curves.size());

    std::vector<FunctionGrid> centered;
    centered.reserve(curves.size());
    for (const auto& c : curves)
        centered.emplace_back(c.grid_points(), c.values() - mean);
    return {std::move(centered), FunctionGrid(first.grid_points(), std::move(mean))};
}

} // namespace sgflm
