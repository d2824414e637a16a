#include "sgflm/experiments.hpp"

#include <atomic>
#include <stdexcept>
#include <thread>

#include "sgflm/errors.hpp"

namespace sgflm {

namespace {

void check_same_grid(const FunctionGrid& a, const FunctionGrid& b)
{
    if (!a.same_grid(b))
        throw std::invalid_argument("curves live on different grids");
}

FitResult fit_for(std::span<const Dataset> data, const FitConfig& fit, const McOptions& options,
                  ModelKind model)
{
    FitResult result = options.fixed_p
        ? (model == ModelKind::sgflm ? fit_sgflm(data, *options.fixed_p, fit)
                                     : fit_gflm(data, *options.fixed_p, fit))
        : select_p_aic(data, fit, model);
    if (!result.converged)
        throw NumericalError(to_string(model) + " fit did not converge: " + result.message);
    return result;
}

ModelRecord score_model(const MCCase& mc, const FitResult& result, const BasisSet& basis,
                        const McOptions& options)
{
    const auto& data = mc.datasets;
    const int big_n = static_cast<int>(data.size());
    const bool spatial = result.model == ModelKind::sgflm;

    ModelRecord rec;
    rec.theta_hat = result.theta_hat;
    rec.p = result.p_selected;
    rec.converged = result.converged;
    rec.loglik = result.loglik;
    rec.alpha_raw = uncentered_intercept(result.theta_hat.alpha, result.theta_hat.beta,
                                         data.front().meta.xbar_scores);
    rec.beta_curve = reconstruct(result.theta_hat.beta, basis).values();
    rec.fmse = case_fmse(data, result.theta_hat);

    const SandwichMatrices sw = sandwich(data, result.theta_hat, spatial);
    if (spatial)
        rec.ci = ci_eta(sw, result.theta_hat.eta, big_n, options.level);
    rec.band = band_beta(sw, result.theta_hat, basis, big_n, options.level, options.band_type);
    return rec;
}

} // namespace

CaseRecord run_case(const SimConfig& sim, const FitConfig& fit, const McOptions& options,
                    int index, int attempt)
{
    SimConfig cfg = sim;
    cfg.seed = derive_seed(sim.seed, static_cast<std::uint64_t>(index),
                           static_cast<std::uint64_t>(attempt));
    const MCCase mc = simulate_case(cfg);
    const BasisSet basis = make_trig_basis(cfg.basis_size, cfg.mu.grid_points());

    CaseRecord rec;
    rec.index = index;
    rec.seed = cfg.seed;
    rec.attempts = attempt + 1;
    rec.sgflm = score_model(mc, fit_for(mc.datasets, fit, options, ModelKind::sgflm), basis, options);
    rec.gflm = score_model(mc, fit_for(mc.datasets, fit, options, ModelKind::gflm), basis, options);
    rec.ok = true;
    return rec;
}

MCReport run_mc(const SimConfig& sim, const FitConfig& fit, const McOptions& options)
{
    sim.validate();
    fit.validate();
    if (options.cases < 1)
        throw std::invalid_argument("run_mc: need at least one case");

    MCReport report;
    report.sim = sim;
    report.fit = fit;
    report.options = options;
    report.cases.resize(options.cases);

    std::atomic<int> next{0};
    const auto worker = [&] {
        for (int m = next++; m < options.cases; m = next++) {
            CaseRecord rec;
            std::string reason;
            for (int attempt = 0; attempt < 2; ++attempt) {
                try {
                    rec = run_case(sim, fit, options, m, attempt);
                    break;
                } catch (const std::exception& e) {
                    reason = e.what();
                    rec = CaseRecord{};
                    rec.index = m;
                    rec.attempts = attempt + 1;
                    rec.seed = derive_seed(sim.seed, m, attempt);
                    rec.failure = reason;
                }
            }
            report.cases[m] = std::move(rec);
        }
    };

    const int nthreads = std::max(1, std::min(options.workers, options.cases));
    if (nthreads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(nthreads);
        for (int t = 0; t < nthreads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }

    aggregate(report);
    return report;
}

void aggregate(MCReport& report)
{
    const SimConfig& sim = report.sim;
    const BasisSet basis = make_trig_basis(sim.basis_size, sim.mu.grid_points());
    const FunctionGrid truth = reconstruct(sim.true_theta.beta, basis);
    report.beta_true_curve = truth.values();

    report.failed_cases = 0;
    std::vector<const CaseRecord*> ok;
    for (const auto& c : report.cases) {
        if (c.ok)
            ok.push_back(&c);
        else
            ++report.failed_cases;
    }
    report.sgflm.clear();
    report.gflm.clear();
    if (ok.empty())
        return;

    const double eta_true = sim.true_theta.eta;
    const double alpha_true = sim.true_theta.alpha;

    const auto fill = [&](MetricTable& table, ConfidenceBand& avg, auto member, bool spatial) {
        std::vector<double> etas, alphas, fmse;
        std::vector<FunctionGrid> curves;
        std::vector<std::pair<double, double>> cis;
        std::vector<ConfidenceBand> bands;
        for (const CaseRecord* c : ok) {
            const ModelRecord& r = c->*member;
            etas.push_back(r.theta_hat.eta);
            alphas.push_back(r.alpha_raw);
            fmse.push_back(r.fmse);
            curves.emplace_back(truth.grid_points(), r.beta_curve);
            bands.push_back(r.band);
            if (r.ci)
                cis.push_back(*r.ci);
        }
        if (spatial) {
            const auto [e, mse] = metric_scalar(etas, eta_true);
            table["E_eta"] = e;
            table["MSE_eta"] = mse;
            table["CI_eta"] = metric_ci_coverage(cis, eta_true);
        }
        const auto [ea, msea] = metric_scalar(alphas, alpha_true);
        table["E_alpha"] = ea;
        table["MSE_alpha"] = msea;
        table["MISE_beta"] = metric_mise(curves, truth);
        table["IV_beta"] = curves.size() >= 2 ? metric_iv(curves) : 0.0;
        double s = 0.0;
        for (double v : fmse)
            s += v;
        table["FMSE"] = s / static_cast<double>(fmse.size());
        avg = average_band(bands);
    };
    fill(report.sgflm, report.average_band_sgflm, &CaseRecord::sgflm, true);
    fill(report.gflm, report.average_band_gflm, &CaseRecord::gflm, false);
}

double case_fmse(std::span<const Dataset> data, const Theta& theta_hat)
{
    if (data.empty())
        throw std::invalid_argument("case_fmse: no replicates");
    double total = 0.0;
    for (const auto& d : data) {
        const Eigen::VectorXd a = natural_parameters(theta_hat, d);
        double s = 0.0;
        for (int i = 0; i < d.num_sites(); ++i) {
            const double r = d.responses[i] - logistic(a[i]);
            s += r * r;
        }
        total += s / d.num_sites();
    }
    return total / static_cast<double>(data.size());
}

double metric_fmse(std::span<const MCCase> cases, std::span<const Theta> fits)
{
    if (cases.size() != fits.size() || cases.empty())
        throw std::invalid_argument("metric_fmse: need one fit per case");
    double total = 0.0;
    for (std::size_t m = 0; m < cases.size(); ++m)
        total += case_fmse(cases[m].datasets, fits[m]);
    return total / static_cast<double>(cases.size());
}

double metric_mise(std::span<const FunctionGrid> beta_hat, const FunctionGrid& beta_true)
{
    if (beta_hat.empty())
        throw std::invalid_argument("metric_mise: no curves");
    double total = 0.0;
    for (const auto& b : beta_hat) {
        check_same_grid(b, beta_true);
        const FunctionGrid diff(b.grid_points(), b.values() - beta_true.values());
        total += quad_inner_product(diff, diff);
    }
    return total / static_cast<double>(beta_hat.size());
}

double metric_iv(std::span<const FunctionGrid> beta_hat)
{
    if (beta_hat.size() < 2)
        throw std::invalid_argument("metric_iv: need at least two curves");
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(beta_hat.front().size());
    for (const auto& b : beta_hat) {
        check_same_grid(b, beta_hat.front());
        mean += b.values();
    }
    mean /= static_cast<double>(beta_hat.size());
    return metric_mise(beta_hat, FunctionGrid(beta_hat.front().grid_points(), mean));
}

std::pair<double, double> metric_scalar(std::span<const double> values, double truth)
{
    if (values.empty())
        throw std::invalid_argument("metric_scalar: no values");
    double sum = 0.0, sq = 0.0;
    for (double v : values) {
        sum += v;
        sq += (v - truth) * (v - truth);
    }
    const double m = static_cast<double>(values.size());
    return {sum / m, sq / m};
}

double metric_ci_coverage(std::span<const std::pair<double, double>> intervals, double truth)
{
    if (intervals.empty())
        throw std::invalid_argument("metric_ci_coverage: no intervals");
    int hits = 0;
    for (const auto& [lo, hi] : intervals)
        if (lo <= truth && truth <= hi)
            ++hits;
    return static_cast<double>(hits) / static_cast<double>(intervals.size());
}

ConfidenceBand average_band(std::span<const ConfidenceBand> bands)
{
    if (bands.empty())
        throw std::invalid_argument("average_band: no bands");
    ConfidenceBand avg = bands.front();
    for (std::size_t m = 1; m < bands.size(); ++m) {
        const auto& b = bands[m];
        if (b.grid_points.size() != avg.grid_points.size()
            || (b.grid_points - avg.grid_points).cwiseAbs().maxCoeff() > 1e-12)
            throw std::invalid_argument("average_band: bands live on different grids");
        avg.center += b.center;
        avg.lower += b.lower;
        avg.upper += b.upper;
    }
    const double m = static_cast<double>(bands.size());
    avg.center /= m;
    avg.lower /= m;
    avg.upper /= m;
    return avg;
}

} // namespace sgflm
