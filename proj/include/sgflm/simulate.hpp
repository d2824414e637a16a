#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sgflm/function_space.hpp"
#include "sgflm/lattice.hpp"
#include "sgflm/model.hpp"

namespace sgflm {

using Rng = std::mt19937_64;

/// Deterministic child seed for stream (a, b) of a master seed.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0);

enum class ChainMode {
    /// Independent chain per replicate, `burn_in` sweeps each.
    per_replicate,
    /// One chain per case: `burn_in` sweeps, then `thin` sweeps between
    /// emitted replicates, switching to each replicate's covariate field.
    thinned_shared,
};

std::string to_string(ChainMode mode);
ChainMode parse_chain_mode(const std::string& name);

/// mu(t) = 4 t sin(3t).
double default_mean_curve(double t);

struct SimConfig {
    LatticeSpec lattice{};
    /// beta holds the true basis coefficients (length <= basis_size).
    Theta true_theta{0.6, 0.0, Eigen::Vector3d(1.0, 1.0 / 2.0, 1.0 / 3.0)};
    int basis_size = 20;
    FunctionGrid mu = FunctionGrid::sample(uniform_grid(50), default_mean_curve);
    /// Standard deviations of the generating scores; empty means 1/j.
    Eigen::VectorXd score_sd;
    int burn_in = 200;
    int thin = 200;
    int replicates = 20;
    std::uint64_t seed = 1;
    ChainMode chain_mode = ChainMode::thinned_shared;
    double eta_max = kDefaultEtaMax;

    int grid_points() const { return static_cast<int>(mu.size()); }
    Eigen::VectorXd resolved_score_sd() const;
    void validate() const;
};

struct CovariateDraw {
    /// One sampled curve per row, on the mu grid.
    Eigen::MatrixXd curves;
    /// The N(0, sd_j^2) scores used to build the curves.
    Eigen::MatrixXd generating_scores;
    /// Quadrature projections of the raw curves.
    Eigen::MatrixXd projected_scores;
    /// Projections of X_i - Xbar.
    Eigen::MatrixXd centered_scores;
    /// Projection of Xbar.
    Eigen::VectorXd xbar_scores;

    FunctionGrid curve(int i, const Eigen::VectorXd& grid) const;
};

/// Draws `count` curves X_i = mu + sum_j eps_ij phi_j and projects them, raw
/// and centered on their pooled mean. count = 0 means one lattice worth.
CovariateDraw generate_covariates(const SimConfig& config, const BasisSet& basis, Rng& rng,
                                  int count = 0);

/// Systematic row-major Gibbs sweeps for a fixed covariate field.
class GibbsSampler {
public:
    GibbsSampler(const Lattice& lattice, double eta, const Eigen::VectorXd& linear_predictor);

    void set_field(const Eigen::VectorXd& linear_predictor);
    void sweep(Eigen::VectorXd& y, Rng& rng) const;

private:
    Lattice lattice_;
    double eta_;
    Eigen::VectorXd lp_;
    Eigen::VectorXd kappa_sum_; // sum_{N_i} kappa_j
};

/// Independent Bernoulli(1/2) start.
Eigen::VectorXd random_start(int n, Rng& rng);

/// A case: N replicates generated under the same true parameter.
struct MCCase {
    std::vector<Dataset> datasets;
    std::uint64_t case_seed = 0;
};

/// Runs the Gibbs sampler against the raw covariate field of each replicate
/// (rows k*n .. (k+1)*n - 1 of the draw) and packages datasets holding the
/// centered scores.
MCCase gibbs_simulate(const SimConfig& config, const CovariateDraw& draw, Rng& rng);

/// Covariates plus responses for one case, seeded from config.seed.
MCCase simulate_case(const SimConfig& config);

/// Normalized joint probabilities over {0,1}^n for the model whose full
/// conditionals are the centered autologistic ones. Bit i of the table
/// index is y_i. Requires n <= 20.
std::vector<double> exact_joint(const Theta& theta, const Eigen::MatrixXd& scores,
                                const Lattice& lattice);

/// Table index of a 0/1 configuration.
std::size_t state_index(const Eigen::VectorXd& y);

} // namespace sgflm
