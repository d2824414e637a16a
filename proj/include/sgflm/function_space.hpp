#pragma once

#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace sgflm {

/// Coefficients of a function in an orthonormal basis, e.g. the scores
/// eps_j = <X, phi_j> of a covariate curve.
using ScoreVector = Eigen::VectorXd;

/// Uniform grid on [0,1] with both endpoints included: t_k = k / (T - 1).
Eigen::VectorXd uniform_grid(int num_points = 50);

/// A real function sampled on a uniform grid of [0,1].
class FunctionGrid {
public:
    FunctionGrid(Eigen::VectorXd grid_points, Eigen::VectorXd values);

    /// Samples f on the given grid.
    template <class F>
    static FunctionGrid sample(const Eigen::VectorXd& grid_points, F&& f)
    {
        Eigen::VectorXd v(grid_points.size());
        for (Eigen::Index k = 0; k < grid_points.size(); ++k)
            v[k] = f(grid_points[k]);
        return FunctionGrid(grid_points, std::move(v));
    }

    const Eigen::VectorXd& grid_points() const { return t_; }
    const Eigen::VectorXd& values() const { return values_; }
    Eigen::Index size() const { return t_.size(); }

    bool same_grid(const FunctionGrid& other) const;

private:
    Eigen::VectorXd t_;
    Eigen::VectorXd values_;
};

/// Throws std::invalid_argument unless the grid is uniform on [0,1], strictly
/// increasing and has at least two points.
void validate_grid(const Eigen::VectorXd& grid_points);

/// Composite trapezoid weights for a uniform grid.
Eigen::VectorXd trapezoid_weights(const Eigen::VectorXd& grid_points);

/// Orthonormal functions sampled on a shared grid. Column j of matrix()
/// holds phi_{j+1}.
class BasisSet {
public:
    BasisSet(Eigen::VectorXd grid_points, Eigen::MatrixXd values);

    int num_functions() const { return static_cast<int>(phi_.cols()); }
    const Eigen::VectorXd& grid_points() const { return t_; }
    const Eigen::MatrixXd& matrix() const { return phi_; }
    const Eigen::VectorXd& weights() const { return w_; }

    /// phi_{j+1} for 0-based j.
    FunctionGrid function(int j) const;

    /// Quadrature Gram matrix <phi_u, phi_v>.
    Eigen::MatrixXd gram() const;

private:
    Eigen::VectorXd t_;
    Eigen::MatrixXd phi_;
    Eigen::VectorXd w_;
};

/// Trigonometric basis phi_1 = 1, phi_{2k} = sqrt(2) cos(2 pi k t),
/// phi_{2k+1} = sqrt(2) sin(2 pi k t). Requires at least 2J+1 grid points.
BasisSet make_trig_basis(int num_functions, const Eigen::VectorXd& grid_points);

/// Trapezoid approximation of the integral of f*g over [0,1].
double quad_inner_product(const FunctionGrid& f, const FunctionGrid& g);

ScoreVector project(const FunctionGrid& x, const BasisSet& basis);

/// Projects every row of `curves` (one sampled curve per row, on the basis
/// grid) in a single product. Returns rows x J.
Eigen::MatrixXd project_rows(const Eigen::MatrixXd& curves, const BasisSet& basis);

/// sum_j coeffs[j] phi_j(t). coeffs may be shorter than the basis.
FunctionGrid reconstruct(const ScoreVector& coeffs, const BasisSet& basis);

struct CenteredCovariates {
    std::vector<FunctionGrid> centered;
    FunctionGrid mean;
};

/// X_i - Xbar together with the sample mean Xbar.
CenteredCovariates center_covariates(const std::vector<FunctionGrid>& curves);

} // namespace sgflm
