#pragma once

#include <span>
#include <utility>

#include <Eigen/Dense>

#include "sgflm/function_space.hpp"
#include "sgflm/model.hpp"

namespace sgflm {

/// Refuse to invert matrices whose condition number exceeds this.
inline constexpr double kMaxConditionNumber = 1e12;

/// Empirical Godambe information and its blocks.
///
/// With eta present the coordinates are (eta, alpha, beta_1..beta_p); G11_inv
/// is the eta entry of G_inv and G22_inv the (alpha, beta) block. Without eta
/// (independence fits) G22_inv is all of G_inv and G11_inv is NaN.
struct SandwichMatrices {
    Eigen::MatrixXd H;
    Eigen::MatrixXd J;
    Eigen::MatrixXd G;
    Eigen::MatrixXd G_inv;
    double G11_inv = 0.0;
    Eigen::MatrixXd G22_inv;
    bool has_eta = true;
    double cond_H = 0.0;
    double cond_J = 0.0;
};

/// Builds G = H J^-1 H and G^-1 = H^-1 J H^-1 from given H and J.
SandwichMatrices sandwich_from(const Eigen::MatrixXd& h, const Eigen::MatrixXd& j, bool has_eta);

/// H = N^-1 sum_k -l''_c(theta | y_k), J = N^-1 sum_k l'_c l'_c^T at theta_hat.
/// include_eta = false drops the eta coordinate (independence model).
SandwichMatrices sandwich(std::span<const Dataset> data, const Theta& theta_hat,
                          bool include_eta = true);

/// eta_hat -+ z_{(1+level)/2} sqrt(G11_inv / N).
std::pair<double, double> ci_eta(const SandwichMatrices& sw, double eta_hat, int n_replicates,
                                 double level);

/// (N d^T G d - k) / sqrt(2k), d = theta_hat - theta0, k = dim theta.
double quadratic_stat_theta(const SandwichMatrices& sw, const Theta& theta_hat, const Theta& theta0,
                            int n_replicates);

/// (N d^T (G22_inv)^-1 d - (p+1)) / sqrt(2(p+1)) for d over (alpha, beta).
double quadratic_stat_beta(const SandwichMatrices& sw, const Eigen::VectorXd& beta_hat_with_alpha,
                           const Eigen::VectorXd& beta0_with_alpha, int n_replicates);

enum class BandType { simultaneous, pointwise };

struct ConfidenceBand {
    Eigen::VectorXd grid_points;
    Eigen::VectorXd center;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    double level = 0.95;
    bool simultaneous = true;
};

/// Band for beta(t) = sum_{j<=p} beta_j phi_j(t). The simultaneous band
/// projects the chi^2_{p+1} ellipsoid for (alpha, beta) onto
/// (0, phi_1(t)..phi_p(t)); the pointwise band uses the normal quantile with
/// the same variance function.
ConfidenceBand band_beta(const SandwichMatrices& sw, const Theta& theta_hat, const BasisSet& basis,
                         int n_replicates, double level,
                         BandType type = BandType::simultaneous);

} // namespace sgflm
