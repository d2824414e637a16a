#pragma once

#include <cstdint>
#include <span>
#include <string>

#include <Eigen/Dense>

#include "sgflm/lattice.hpp"

namespace sgflm {

inline constexpr double kDefaultEtaMax = 2.0;

/// Parameter vector (eta, alpha, beta_1..beta_p). The truncation level p is
/// the length of beta. Flattened order puts eta first, then alpha.
struct Theta {
    double eta = 0.0;
    double alpha = 0.0;
    Eigen::VectorXd beta;

    int p() const { return static_cast<int>(beta.size()); }

    Eigen::VectorXd to_vector() const;
    static Theta from_vector(const Eigen::VectorXd& v);

    /// (alpha, beta_1..beta_p), the regression block.
    Eigen::VectorXd regression_vector() const;
};

/// Throws std::invalid_argument on non-finite entries or |eta| > eta_max.
void check_theta(const Theta& theta, double eta_max = kDefaultEtaMax);

/// Provenance carried alongside a replicate.
struct DatasetMeta {
    int grid_points = 50;
    int basis_size = 0;
    bool centered = false;
    /// Basis scores of the covariate mean that was subtracted (length J).
    Eigen::VectorXd xbar_scores;
    std::uint64_t seed = 0;
    int replicate = 0;
    std::string chain_mode;
    std::string sweep_order = "row-major";
};

/// One replicate: basis scores of every site's covariate (n x J) and the
/// binary responses on the lattice.
struct Dataset {
    Lattice lattice;
    Eigen::MatrixXd scores;
    Eigen::VectorXd responses;
    DatasetMeta meta;

    int num_sites() const { return lattice.size(); }
    int num_scores() const { return static_cast<int>(scores.cols()); }

    /// Throws DataError when shapes disagree, scores are not finite or a
    /// response is not 0/1.
    void validate() const;
};

/// Value, gradient and Hessian of the log composite likelihood.
struct CLDerivatives {
    double value = 0.0;
    Eigen::VectorXd gradient;
    Eigen::MatrixXd hessian;

    CLDerivatives& operator+=(const CLDerivatives& other);
};

double logistic(double x);
/// log(1 + e^x) without overflow.
double log1p_exp(double x);

/// alpha + sum_{j<=p} beta_j eps_j for every row of scores.
Eigen::VectorXd linear_predictor(const Theta& theta, const Eigen::MatrixXd& scores);

/// Independence-model mean for one site.
double kappa(const Theta& theta, const Eigen::Ref<const Eigen::VectorXd>& scores_row);

/// A_i = logit(kappa_i) + eta * sum_{j in N_i} (y_j - kappa_j).
double natural_parameter(const Theta& theta, const Dataset& data, int i);

/// P(Y_i = 1 | y(N_i)) = logistic(A_i).
double conditional_probability(const Theta& theta, const Dataset& data, int i);

/// Natural parameters of all sites.
Eigen::VectorXd natural_parameters(const Theta& theta, const Dataset& data);

double composite_loglik(const Theta& theta, const Dataset& data);

CLDerivatives composite_loglik_derivatives(const Theta& theta, const Dataset& data);

/// Sums over replicates in index order.
double total_loglik(const Theta& theta, std::span<const Dataset> data);
CLDerivatives total_derivatives(const Theta& theta, std::span<const Dataset> data);

} // namespace sgflm
