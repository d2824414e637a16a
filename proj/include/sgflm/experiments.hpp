#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "sgflm/fit.hpp"
#include "sgflm/function_space.hpp"
#include "sgflm/inference.hpp"
#include "sgflm/simulate.hpp"

namespace sgflm {

struct McOptions {
    int cases = 100;
    int workers = 1;
    /// Fixed truncation level; unset runs AIC selection per case.
    std::optional<int> fixed_p;
    double level = 0.95;
    BandType band_type = BandType::simultaneous;
};

struct ModelRecord {
    Theta theta_hat;
    /// Intercept mapped back to the raw (uncentered) covariates.
    double alpha_raw = 0.0;
    int p = 0;
    bool converged = false;
    double loglik = 0.0;
    Eigen::VectorXd beta_curve;
    double fmse = 0.0;
    /// eta interval, SGFLM only.
    std::optional<std::pair<double, double>> ci;
    ConfidenceBand band;
};

struct CaseRecord {
    int index = 0;
    std::uint64_t seed = 0;
    int attempts = 0;
    bool ok = false;
    std::string failure;
    ModelRecord sgflm;
    ModelRecord gflm;
};

using MetricTable = std::map<std::string, double>;

struct MCReport {
    SimConfig sim;
    FitConfig fit;
    McOptions options;
    std::vector<CaseRecord> cases;
    int failed_cases = 0;
    Eigen::VectorXd beta_true_curve;
    MetricTable sgflm;
    MetricTable gflm;
    ConfidenceBand average_band_sgflm;
    ConfidenceBand average_band_gflm;
};

/// Simulates, fits and scores a single case. Throws when a fit does not
/// converge or inference fails.
CaseRecord run_case(const SimConfig& sim, const FitConfig& fit, const McOptions& options,
                    int index, int attempt);

/// Monte Carlo study over options.cases cases. Case m uses the seed
/// derive_seed(sim.seed, m, attempt); a failed case is retried once with
/// attempt = 1 and then excluded. Aggregation runs in case order, so the
/// report does not depend on options.workers.
MCReport run_mc(const SimConfig& sim, const FitConfig& fit, const McOptions& options);

/// Recomputes the aggregate tables of a report from its case records.
void aggregate(MCReport& report);

/// n^-1 sum_i (y_i - logistic(A_i))^2 averaged over replicates. Pass eta = 0
/// for the independence model.
double case_fmse(std::span<const Dataset> data, const Theta& theta_hat);

/// Average of case_fmse over cases.
double metric_fmse(std::span<const MCCase> cases, std::span<const Theta> fits);

double metric_mise(std::span<const FunctionGrid> beta_hat, const FunctionGrid& beta_true);
double metric_iv(std::span<const FunctionGrid> beta_hat);

/// (mean, mean squared deviation from truth).
std::pair<double, double> metric_scalar(std::span<const double> values, double truth);

double metric_ci_coverage(std::span<const std::pair<double, double>> intervals, double truth);

ConfidenceBand average_band(std::span<const ConfidenceBand> bands);

} // namespace sgflm
