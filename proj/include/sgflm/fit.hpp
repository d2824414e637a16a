#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgflm/function_space.hpp"
#include "sgflm/model.hpp"

namespace sgflm {

enum class ModelKind { sgflm, gflm };
enum class InitMode { fpcr, zeros };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);
std::string to_string(InitMode mode);
InitMode parse_init_mode(const std::string& name);

struct FitConfig {
    std::vector<int> p_candidates{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
    double eta_low = -kDefaultEtaMax;
    double eta_high = kDefaultEtaMax;
    int max_iter = 100;
    /// Absolute tolerance on the sup-norm of the summed gradient.
    double grad_tol = 1e-6;
    int step_halving_max = 30;
    InitMode init_mode = InitMode::fpcr;
    /// When set, eta is held at this value and only (alpha, beta) are fitted.
    std::optional<double> fixed_eta;
    double eta_max = kDefaultEtaMax;

    void validate() const;
};

struct AicRow {
    int p = 0;
    double aic = 0.0;
    double loglik = 0.0;
    bool converged = false;
};

struct FitResult {
    ModelKind model = ModelKind::sgflm;
    Theta theta_hat;
    int p_selected = 0;
    /// Number of estimated parameters.
    int q = 0;
    double aic = 0.0;
    double loglik = 0.0;
    bool converged = false;
    int n_iterations = 0;
    double grad_inf_norm = 0.0;
    /// Objective after initialization and after every accepted step.
    std::vector<double> loglik_trace;
    std::vector<AicRow> per_p_table;
    std::string message;
};

struct LogisticFit {
    Eigen::VectorXd coef;
    bool converged = false;
    int iterations = 0;
};

/// Newton-Raphson (IRLS) logistic regression of y on the columns of x,
/// optionally with a ridge penalty 0.5 * ridge * |b|^2.
LogisticFit logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge = 0.0,
                          int max_iter = 100, double tol = 1e-10);

/// Rows (1, eps_i1..eps_ip) and responses of every replicate stacked in order.
void pooled_design(std::span<const Dataset> data, int p, Eigen::MatrixXd& x, Eigen::VectorXd& y);

struct IndependenceInit {
    double alpha = 0.0;
    Eigen::VectorXd beta;
    bool converged = false;
};

/// Independence-model logistic fit of pooled responses on the first p
/// scores. In fpcr mode the scores are rotated to their sample principal
/// components before fitting and the coefficients rotated back.
IndependenceInit init_independence(std::span<const Dataset> data, int p,
                                   InitMode mode = InitMode::fpcr);

/// Golden-section maximizer of eta -> sum_k l_c((eta, alpha0, beta0) | y_k)
/// on [low, high].
double init_eta_slice(std::span<const Dataset> data, double alpha0, const Eigen::VectorXd& beta0,
                      double low, double high, double tol = 1e-4);

FitResult fit_sgflm(std::span<const Dataset> data, int p, const FitConfig& config);

/// Independence model: eta fixed at 0, q = p + 1.
FitResult fit_gflm(std::span<const Dataset> data, int p, const FitConfig& config);

/// Fits every p in config.p_candidates and returns the converged fit with
/// the smallest AIC = 2q - 2 l_{c,N}, carrying the per-p table.
FitResult select_p_aic(std::span<const Dataset> data, const FitConfig& config,
                       ModelKind model = ModelKind::sgflm);

/// alpha + sum_j beta_j <Xbar, phi_j>: intercept for centered covariates
/// from the intercept for raw covariates.
double adjust_intercept_for_centering(double alpha_hat, const Eigen::VectorXd& beta_hat,
                                      const FunctionGrid& xbar, const BasisSet& basis);

/// Inverse map: intercept for raw covariates from a fit on centered scores,
/// given the basis scores of the subtracted mean.
double uncentered_intercept(double alpha_centered, const Eigen::VectorXd& beta_hat,
                            const Eigen::VectorXd& xbar_scores);

} // namespace sgflm
