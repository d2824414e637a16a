#include <cmath>
#include <random>
#include <set>

#include "doctest.h"

#include "helpers.hpp"
#include "sgflm/simulate.hpp"

using namespace sgflm;

namespace {

Dataset small_instance(const Lattice& lat, int p, std::uint64_t seed)
{
    Rng rng(seed);
    std::normal_distribution<double> z;
    Dataset d{lat, Eigen::MatrixXd(lat.size(), p), Eigen::VectorXd::Zero(lat.size()), {}};
    for (int i = 0; i < lat.size(); ++i)
        for (int j = 0; j < p; ++j)
            d.scores(i, j) = z(rng);
    return d;
}

double total_variation(const std::vector<double>& p, const std::vector<double>& q)
{
    double s = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k)
        s += std::abs(p[k] - q[k]);
    return 0.5 * s;
}

} // namespace

TEST_CASE("seed derivation is deterministic and spreads nearby inputs")
{
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t a = 0; a < 50; ++a)
        for (std::uint64_t b = 0; b < 3; ++b)
            seen.insert(derive_seed(7, a, b));
    CHECK(seen.size() == 150);
    CHECK(derive_seed(1, 0, 0) != derive_seed(2, 0, 0));
}

TEST_CASE("chain mode names")
{
    CHECK(parse_chain_mode("per_replicate") == ChainMode::per_replicate);
    CHECK(parse_chain_mode(to_string(ChainMode::thinned_shared)) == ChainMode::thinned_shared);
    CHECK_THROWS(parse_chain_mode("parallel"));
}

TEST_CASE("config validation")
{
    SimConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.resolved_score_sd()[3] == doctest::Approx(0.25));
    cfg.thin = 0;
    CHECK_THROWS(cfg.validate());
    cfg = SimConfig{};
    cfg.true_theta.eta = 3.0;
    CHECK_THROWS(cfg.validate());
    cfg = SimConfig{};
    cfg.basis_size = 2;
    CHECK_THROWS(cfg.validate());
}

TEST_CASE("covariate scores have the generating variances and project back exactly")
{
    SimConfig cfg;
    const BasisSet basis = make_trig_basis(cfg.basis_size, cfg.mu.grid_points());
    Rng rng(12);
    const CovariateDraw draw = generate_covariates(cfg, basis, rng, 20000);
    const ScoreVector mu_scores = project(cfg.mu, basis);
    // X = mu + sum eps_j phi_j and the basis is orthonormal under the quadrature
    const Eigen::MatrixXd diff = (draw.projected_scores.rowwise() - mu_scores.head(20).transpose())
        - draw.generating_scores;
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-10);
    for (int j : {0, 1, 4, 19}) {
        const Eigen::VectorXd col = draw.generating_scores.col(j);
        const double var = (col.array() - col.mean()).square().mean();
        const double target = 1.0 / ((j + 1.0) * (j + 1.0));
        // four standard errors of a sample variance
        CHECK(std::abs(var - target) < 4.0 * target * std::sqrt(2.0 / 20000));
    }
    CHECK(draw.centered_scores.colwise().mean().cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::RowVectorXd raw_mean = draw.projected_scores.colwise().mean();
    CHECK((raw_mean.transpose() - draw.xbar_scores).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("exact joint conditionals equal the model's full conditionals")
{
    const Lattice lat = build_lattice(3, 3, true, Neighborhood::four_nearest);
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int rep = 0; rep < 10; ++rep) {
        Dataset d = small_instance(lat, 2, 100 + rep);
        const Theta th{1.8 * u(rng), u(rng), Eigen::Vector2d(u(rng), u(rng))};
        const std::vector<double> joint = exact_joint(th, d.scores, lat);
        double total = 0.0;
        for (double v : joint)
            total += v;
        CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
        for (std::size_t s = 0; s < joint.size(); s += 7) {
            for (int i = 0; i < 9; ++i)
                d.responses[i] = (s >> i) & 1U;
            for (int i = 0; i < 9; ++i) {
                const std::size_t on = s | (std::size_t{1} << i);
                const std::size_t off = s & ~(std::size_t{1} << i);
                const double cond = joint[on] / (joint[on] + joint[off]);
                CHECK(std::abs(cond - conditional_probability(th, d, i)) < 1e-12);
            }
        }
    }
}

TEST_CASE("exact joint rejects large lattices")
{
    const Lattice lat = build_lattice(5, 5, true, Neighborhood::four_nearest);
    CHECK_THROWS(exact_joint(Theta{0.0, 0.0, Eigen::VectorXd::Zero(1)}, Eigen::MatrixXd::Zero(25, 1), lat));
}

TEST_CASE("Gibbs sweeps converge to the exact joint on a 3x3 torus")
{
    const Lattice lat = build_lattice(3, 3, true, Neighborhood::four_nearest);
    const Dataset d = small_instance(lat, 1, 5);
    const Theta th{0.6, 0.2, Eigen::VectorXd::Constant(1, 0.5)};
    const std::vector<double> joint = exact_joint(th, d.scores, lat);

    GibbsSampler sampler(lat, th.eta, linear_predictor(th, d.scores));
    Rng rng(77);
    Eigen::VectorXd y = random_start(9, rng);
    for (int s = 0; s < 100; ++s)
        sampler.sweep(y, rng);
    constexpr int draws = 1000000;
    std::vector<double> freq(joint.size(), 0.0);
    for (int s = 0; s < draws; ++s) {
        sampler.sweep(y, rng);
        freq[state_index(y)] += 1.0 / draws;
    }
    // i.i.d. sampling noise at 10^6 draws puts TV near 0.008
    CHECK(total_variation(freq, joint) < 0.02);
}

TEST_CASE("eta = 0 Gibbs sweeps are independent Bernoulli draws")
{
    const Lattice lat = build_lattice(3, 3, true, Neighborhood::four_nearest);
    const Eigen::VectorXd lp = Eigen::VectorXd::LinSpaced(9, -1.0, 1.0);
    GibbsSampler sampler(lat, 0.0, lp);
    Rng rng(3);
    Eigen::VectorXd y = Eigen::VectorXd::Zero(9);
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(9);
    constexpr int draws = 40000;
    for (int s = 0; s < draws; ++s) {
        sampler.sweep(y, rng);
        mean += y / draws;
    }
    for (int i = 0; i < 9; ++i)
        CHECK(std::abs(mean[i] - logistic(lp[i])) < 4.0 * 0.5 / std::sqrt(draws));
}

TEST_CASE("simulate_case is reproducible and writes consistent metadata")
{
    for (ChainMode mode : {ChainMode::thinned_shared, ChainMode::per_replicate}) {
        SimConfig cfg;
        cfg.lattice = {6, 6, true, Neighborhood::four_nearest};
        cfg.replicates = 4;
        cfg.burn_in = 20;
        cfg.thin = 5;
        cfg.seed = 42;
        cfg.chain_mode = mode;
        const MCCase a = simulate_case(cfg);
        const MCCase b = simulate_case(cfg);
        REQUIRE(a.datasets.size() == 4);
        for (int k = 0; k < 4; ++k) {
            const Dataset& d = a.datasets[k];
            CHECK_NOTHROW(d.validate());
            CHECK(d.responses == b.datasets[k].responses);
            CHECK(d.scores == b.datasets[k].scores);
            CHECK(d.num_scores() == 20);
            CHECK(d.meta.replicate == k);
            CHECK(d.meta.centered);
            CHECK(d.meta.chain_mode == to_string(mode));
            CHECK(d.meta.xbar_scores.size() == 20);
        }
        cfg.seed = 43;
        const MCCase c = simulate_case(cfg);
        CHECK(c.datasets[0].scores != a.datasets[0].scores);
    }
}

TEST_CASE("positive eta raises neighbor agreement")
{
    const auto agreement = [](const MCCase& mc) {
        double same = 0.0, pairs = 0.0;
        for (const auto& d : mc.datasets)
            for (int i = 0; i < d.num_sites(); ++i)
                for (int j : d.lattice.neighbors(i)) {
                    same += d.responses[i] == d.responses[j];
                    pairs += 1.0;
                }
        return same / pairs;
    };
    const double weak = agreement(testing::small_case(0.0, 12, 12, 5, 1));
    const double strong = agreement(testing::small_case(1.2, 12, 12, 5, 1));
    CHECK(strong > weak + 0.05);
}
