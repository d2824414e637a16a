#pragma once

#include <random>
#include <vector>

#include "sgflm/model.hpp"
#include "sgflm/simulate.hpp"

namespace testing {

/// Replicates with i.i.d. N(0, 1) scores and Bernoulli(0.5) responses.
inline std::vector<sgflm::Dataset> random_datasets(int count, int rows, int cols, int j,
                                                   std::uint64_t seed)
{
    sgflm::Rng rng(seed);
    std::normal_distribution<double> z;
    std::bernoulli_distribution coin(0.5);
    const sgflm::Lattice lat({rows, cols, true, sgflm::Neighborhood::four_nearest});
    std::vector<sgflm::Dataset> out;
    for (int k = 0; k < count; ++k) {
        sgflm::Dataset d{lat, Eigen::MatrixXd(lat.size(), j), Eigen::VectorXd(lat.size()), {}};
        for (int i = 0; i < lat.size(); ++i) {
            for (int c = 0; c < j; ++c)
                d.scores(i, c) = z(rng);
            d.responses[i] = coin(rng) ? 1.0 : 0.0;
        }
        d.meta.basis_size = j;
        d.meta.replicate = k;
        out.push_back(std::move(d));
    }
    return out;
}

/// Small simulated case from the generative model.
inline sgflm::MCCase small_case(double eta, int rows, int cols, int replicates, std::uint64_t seed,
                                int burn_in = 100, int thin = 20)
{
    sgflm::SimConfig cfg;
    cfg.lattice = {rows, cols, true, sgflm::Neighborhood::four_nearest};
    cfg.true_theta.eta = eta;
    cfg.replicates = replicates;
    cfg.burn_in = burn_in;
    cfg.thin = thin;
    cfg.seed = seed;
    return sgflm::simulate_case(cfg);
}

} // namespace testing
