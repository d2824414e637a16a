#include "sgflm/simulate.hpp"

#include <cmath>
#include <stdexcept>

namespace sgflm {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b)
{
    return splitmix64(splitmix64(splitmix64(master) ^ a) ^ (b * 0xd1b54a32d192ed03ULL));
}

std::string to_string(ChainMode mode)
{
    return mode == ChainMode::per_replicate ? "per_replicate" : "thinned_shared";
}

ChainMode parse_chain_mode(const std::string& name)
{
    if (name == "per_replicate")
        return ChainMode::per_replicate;
    if (name == "thinned_shared")
        return ChainMode::thinned_shared;
    throw std::invalid_argument("unknown chain mode '" + name + "'");
}

double default_mean_curve(double t)
{
    return 4.0 * t * std::sin(3.0 * t);
}

Eigen::VectorXd SimConfig::resolved_score_sd() const
{
    if (score_sd.size() > 0)
        return score_sd;
    Eigen::VectorXd sd(basis_size);
    for (int j = 0; j < basis_size; ++j)
        sd[j] = 1.0 / (j + 1);
    return sd;
}

void SimConfig::validate() const
{
    Lattice check(lattice);
    check_theta(true_theta, eta_max);
    if (basis_size < 1)
        throw std::invalid_argument("basis_size must be positive");
    if (true_theta.p() > basis_size)
        throw std::invalid_argument("true beta has more coefficients than the basis");
    if (burn_in < 0)
        throw std::invalid_argument("burn_in must be non-negative");
    if (thin < 1)
        throw std::invalid_argument("thin must be at least 1");
    if (replicates < 1)
        throw std::invalid_argument("replicates must be at least 1");
    const Eigen::VectorXd sd = resolved_score_sd();
    if (sd.size() != basis_size)
        throw std::invalid_argument("score_sd must have basis_size entries");
    if ((sd.array() < 0.0).any() || !sd.allFinite())
        throw std::invalid_argument("score_sd entries must be finite and non-negative");
}

FunctionGrid CovariateDraw::curve(int i, const Eigen::VectorXd& grid) const
{
    return FunctionGrid(grid, curves.row(i).transpose());
}

CovariateDraw generate_covariates(const SimConfig& config, const BasisSet& basis, Rng& rng,
                                  int count)
{
    if (count <= 0)
        count = Lattice(config.lattice).size();
    const int big_j = config.basis_size;
    if (basis.num_functions() < big_j)
        throw std::invalid_argument("generate_covariates: basis smaller than basis_size");
    if (!config.mu.same_grid(FunctionGrid(basis.grid_points(), Eigen::VectorXd::Zero(basis.grid_points().size()))))
        throw std::invalid_argument("generate_covariates: mu and basis live on different grids");

    const Eigen::VectorXd sd = config.resolved_score_sd();
    std::normal_distribution<double> normal(0.0, 1.0);

    CovariateDraw draw;
    draw.generating_scores.resize(count, big_j);
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < big_j; ++j)
            draw.generating_scores(i, j) = sd[j] * normal(rng);

    const Eigen::MatrixXd phi = basis.matrix().leftCols(big_j);
    draw.curves = draw.generating_scores * phi.transpose();
    draw.curves.rowwise() += config.mu.values().transpose();

    draw.projected_scores = project_rows(draw.curves, basis).leftCols(big_j);

    const Eigen::RowVectorXd mean = draw.curves.colwise().mean();
    const Eigen::MatrixXd centered = draw.curves.rowwise() - mean;
    draw.centered_scores = project_rows(centered, basis).leftCols(big_j);
    draw.xbar_scores = project(FunctionGrid(basis.grid_points(), mean.transpose()), basis).head(big_j);
    return draw;
}

GibbsSampler::GibbsSampler(const Lattice& lattice, double eta, const Eigen::VectorXd& linear_predictor)
    : lattice_(lattice), eta_(eta)
{
    set_field(linear_predictor);
}

void GibbsSampler::set_field(const Eigen::VectorXd& linear_predictor)
{
    const int n = lattice_.size();
    if (linear_predictor.size() != n)
        throw std::invalid_argument("GibbsSampler: field size does not match lattice");
    lp_ = linear_predictor;
    Eigen::VectorXd kap(n);
    for (int i = 0; i < n; ++i)
        kap[i] = logistic(lp_[i]);
    kappa_sum_.setZero(n);
    for (int i = 0; i < n; ++i)
        for (int j : lattice_.neighbors(i))
            kappa_sum_[i] += kap[j];
}

void GibbsSampler::sweep(Eigen::VectorXd& y, Rng& rng) const
{
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    const int n = lattice_.size();
    for (int i = 0; i < n; ++i) {
        double ysum = 0.0;
        for (int j : lattice_.neighbors(i))
            ysum += y[j];
        const double a = lp_[i] + eta_ * (ysum - kappa_sum_[i]);
        y[i] = unif(rng) < logistic(a) ? 1.0 : 0.0;
    }
}

Eigen::VectorXd random_start(int n, Rng& rng)
{
    std::bernoulli_distribution coin(0.5);
    Eigen::VectorXd y(n);
    for (int i = 0; i < n; ++i)
        y[i] = coin(rng) ? 1.0 : 0.0;
    return y;
}

MCCase gibbs_simulate(const SimConfig& config, const CovariateDraw& draw, Rng& rng)
{
    const Lattice lattice(config.lattice);
    const int n = lattice.size();
    const int big_n = config.replicates;
    if (draw.projected_scores.rows() != static_cast<Eigen::Index>(n) * big_n)
        throw std::invalid_argument("gibbs_simulate: draw must hold replicates * sites curves");

    const auto field = [&](int k) {
        return linear_predictor(config.true_theta, draw.projected_scores.middleRows(k * n, n));
    };

    MCCase out;
    out.case_seed = config.seed;
    out.datasets.reserve(big_n);

    const auto emit = [&](int k, const Eigen::VectorXd& y) {
        Dataset d{lattice, draw.centered_scores.middleRows(k * n, n), y, {}};
        d.meta.grid_points = config.grid_points();
        d.meta.basis_size = config.basis_size;
        d.meta.centered = true;
        d.meta.xbar_scores = draw.xbar_scores;
        d.meta.seed = config.seed;
        d.meta.replicate = k;
        d.meta.chain_mode = to_string(config.chain_mode);
        out.datasets.push_back(std::move(d));
    };

    if (config.chain_mode == ChainMode::per_replicate) {
        for (int k = 0; k < big_n; ++k) {
            GibbsSampler sampler(lattice, config.true_theta.eta, field(k));
            Eigen::VectorXd y = random_start(n, rng);
            for (int s = 0; s < config.burn_in; ++s)
                sampler.sweep(y, rng);
            emit(k, y);
        }
    } else {
        GibbsSampler sampler(lattice, config.true_theta.eta, field(0));
        Eigen::VectorXd y = random_start(n, rng);
        for (int s = 0; s < config.burn_in; ++s)
            sampler.sweep(y, rng);
        for (int k = 0; k < big_n; ++k) {
            if (k > 0)
                sampler.set_field(field(k));
            for (int s = 0; s < config.thin; ++s)
                sampler.sweep(y, rng);
            emit(k, y);
        }
    }
    return out;
}

MCCase simulate_case(const SimConfig& config)
{
    config.validate();
    const BasisSet basis = make_trig_basis(config.basis_size, config.mu.grid_points());
    Rng rng(config.seed);
    const int count = Lattice(config.lattice).size() * config.replicates;
    const CovariateDraw draw = generate_covariates(config, basis, rng, count);
    return gibbs_simulate(config, draw, rng);
}

std::vector<double> exact_joint(const Theta& theta, const Eigen::MatrixXd& scores,
                                const Lattice& lattice)
{
    const int n = lattice.size();
    if (n > 20)
        throw std::invalid_argument("exact_joint: lattice too large to enumerate");
    if (scores.rows() != n)
        throw std::invalid_argument("exact_joint: scores do not match lattice");

    const Eigen::VectorXd lp = linear_predictor(theta, scores);
    // Leading term lp_i - eta * sum_{N_i} kappa_j; pairwise term eta y_i y_j.
    Eigen::VectorXd lead(n);
    for (int i = 0; i < n; ++i) {
        double ks = 0.0;
        for (int j : lattice.neighbors(i))
            ks += logistic(lp[j]);
        lead[i] = lp[i] - theta.eta * ks;
    }

    const std::size_t states = std::size_t{1} << n;
    std::vector<double> logp(states);
    double max_logp = -INFINITY;
    for (std::size_t s = 0; s < states; ++s) {
        double q = 0.0;
        for (int i = 0; i < n; ++i) {
            if (!((s >> i) & 1U))
                continue;
            q += lead[i];
            for (int j : lattice.neighbors(i))
                if (j > i && ((s >> j) & 1U))
                    q += theta.eta;
        }
        logp[s] = q;
        max_logp = std::max(max_logp, q);
    }
    double total = 0.0;
    for (auto& v : logp) {
        v = std::exp(v - max_logp);
        total += v;
    }
    for (auto& v : logp)
        v /= total;
    return logp;
}

std::size_t state_index(const Eigen::VectorXd& y)
{
    std::size_t s = 0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y[i] != 0.0)
            s |= std::size_t{1} << i;
    return s;
}

} // namespace sgflm
