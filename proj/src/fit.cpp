#include "sgflm/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "sgflm/errors.hpp"

namespace sgflm {

std::string to_string(ModelKind kind)
{
    return kind == ModelKind::sgflm ? "sgflm" : "gflm";
}

ModelKind parse_model_kind(const std::string& name)
{
    if (name == "sgflm")
        return ModelKind::sgflm;
    if (name == "gflm")
        return ModelKind::gflm;
    throw std::invalid_argument("unknown model '" + name + "' (sgflm, gflm)");
}

std::string to_string(InitMode mode)
{
    return mode == InitMode::fpcr ? "fpcr" : "zeros";
}

InitMode parse_init_mode(const std::string& name)
{
    if (name == "fpcr")
        return InitMode::fpcr;
    if (name == "zeros")
        return InitMode::zeros;
    throw std::invalid_argument("unknown init mode '" + name + "' (fpcr, zeros)");
}

void FitConfig::validate() const
{
    if (!(grad_tol > 0.0))
        throw std::invalid_argument("grad_tol must be positive");
    if (!(eta_low <= eta_high))
        throw std::invalid_argument("eta bounds must satisfy low <= high");
    if (std::abs(eta_low) > eta_max || std::abs(eta_high) > eta_max)
        throw std::invalid_argument("eta bounds must lie within +-eta_max");
    if (max_iter < 1 || step_halving_max < 0)
        throw std::invalid_argument("max_iter must be positive and step_halving_max non-negative");
    for (int p : p_candidates)
        if (p < 0)
            throw std::invalid_argument("p candidates must be non-negative");
    if (fixed_eta && std::abs(*fixed_eta) > eta_max)
        throw std::invalid_argument("fixed eta exceeds eta_max");
}

LogisticFit logistic_irls(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                          int max_iter, double tol)
{
    const Eigen::Index k = x.cols();
    LogisticFit fit;
    fit.coef = Eigen::VectorXd::Zero(k);
    for (int it = 1; it <= max_iter; ++it) {
        const Eigen::VectorXd lp = x * fit.coef;
        Eigen::VectorXd mu(lp.size()), w(lp.size());
        for (Eigen::Index i = 0; i < lp.size(); ++i) {
            mu[i] = logistic(lp[i]);
            w[i] = mu[i] * (1.0 - mu[i]);
        }
        Eigen::MatrixXd info = x.transpose() * w.asDiagonal() * x;
        info.diagonal().array() += ridge;
        const Eigen::VectorXd score = x.transpose() * (y - mu) - ridge * fit.coef;
        const Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            break;
        const Eigen::VectorXd step = ldlt.solve(score);
        if (!step.allFinite())
            break;
        fit.coef += step;
        fit.iterations = it;
        if (step.cwiseAbs().maxCoeff() < tol) {
            fit.converged = true;
            break;
        }
    }
    return fit;
}

void pooled_design(std::span<const Dataset> data, int p, Eigen::MatrixXd& x, Eigen::VectorXd& y)
{
    Eigen::Index rows = 0;
    for (const auto& d : data) {
        if (p > d.num_scores())
            throw std::invalid_argument("p exceeds the number of stored scores");
        rows += d.num_sites();
    }
    x.resize(rows, p + 1);
    y.resize(rows);
    Eigen::Index r = 0;
    for (const auto& d : data) {
        const int n = d.num_sites();
        x.block(r, 0, n, 1).setOnes();
        if (p > 0)
            x.block(r, 1, n, p) = d.scores.leftCols(p);
        y.segment(r, n) = d.responses;
        r += n;
    }
}

IndependenceInit init_independence(std::span<const Dataset> data, int p, InitMode mode)
{
    IndependenceInit init;
    init.beta = Eigen::VectorXd::Zero(p);
    if (mode == InitMode::zeros) {
        init.converged = true;
        return init;
    }

    Eigen::MatrixXd x;
    Eigen::VectorXd y;
    pooled_design(data, p, x, y);
    const double ybar = y.mean();
    if (ybar <= 0.0 || ybar >= 1.0)
        throw std::invalid_argument("init_independence: pooled responses must contain both 0 and 1");

    // Rotate the score columns onto their principal axes.
    Eigen::MatrixXd rotation = Eigen::MatrixXd::Identity(p, p);
    if (p > 0) {
        const Eigen::MatrixXd s = x.rightCols(p);
        const Eigen::MatrixXd centered = s.rowwise() - s.colwise().mean();
        const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(s.rows());
        const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
        // Leading components first.
        rotation = eig.eigenvectors().rowwise().reverse();
        x.rightCols(p) = s * rotation;
    }

    const LogisticFit fit = logistic_irls(x, y, 1e-6, 100, 1e-10);
    if (!fit.converged)
        return init; // caller falls back to zeros
    init.alpha = fit.coef[0];
    if (p > 0)
        init.beta = rotation * fit.coef.tail(p);
    init.converged = true;
    return init;
}

double init_eta_slice(std::span<const Dataset> data, double alpha0, const Eigen::VectorXd& beta0,
                      double low, double high, double tol)
{
    if (!(low <= high))
        throw std::invalid_argument("init_eta_slice: empty interval");
    Theta theta{0.0, alpha0, beta0};
    const auto f = [&](double eta) {
        theta.eta = eta;
        return total_loglik(theta, data);
    };

    const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
    double a = low, b = high;
    double c = b - inv_phi * (b - a);
    double d = a + inv_phi * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc >= fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    double best = 0.5 * (a + b);
    double fbest = f(best);
    for (double edge : {low, high}) {
        const double fe = f(edge);
        if (fe > fbest) {
            best = edge;
            fbest = fe;
        }
    }
    return best;
}

namespace {

FitResult fit_model(std::span<const Dataset> data, int p, const FitConfig& config, ModelKind model)
{
    config.validate();
    if (data.empty())
        throw std::invalid_argument("fit: no replicates");
    for (const auto& d : data)
        if (p > d.num_scores())
            throw std::invalid_argument("fit: p = " + std::to_string(p) + " exceeds J = "
                                        + std::to_string(d.num_scores()));

    std::optional<double> fixed = config.fixed_eta;
    if (model == ModelKind::gflm)
        fixed = 0.0;
    const bool free_eta = !fixed.has_value();
    const int dim = p + 2;
    const int offset = free_eta ? 0 : 1; // first free coordinate
    const int nfree = dim - offset;

    FitResult result;
    result.model = model;
    result.p_selected = p;
    result.q = nfree;

    IndependenceInit init = init_independence(data, p, config.init_mode);
    if (!init.converged)
        init = init_independence(data, p, InitMode::zeros);
    Theta theta{0.0, init.alpha, init.beta};
    theta.eta = free_eta
        ? init_eta_slice(data, init.alpha, init.beta, config.eta_low, config.eta_high)
        : *fixed;

    double f = total_loglik(theta, data);
    result.loglik_trace.push_back(f);

    const auto clamp_eta = [&](Eigen::VectorXd& v) {
        if (free_eta)
            v[0] = std::clamp(v[0], config.eta_low, config.eta_high);
    };

    double lambda = 1e-6;
    constexpr double kLambdaMax = 1e12;
    int iter = 0;
    for (; iter < config.max_iter; ++iter) {
        const CLDerivatives der = total_derivatives(theta, data);
        const Eigen::VectorXd g = der.gradient.tail(nfree);
        const Eigen::MatrixXd h = der.hessian.bottomRightCorner(nfree, nfree);
        result.grad_inf_norm = g.cwiseAbs().maxCoeff();
        if (result.grad_inf_norm < config.grad_tol) {
            result.converged = true;
            break;
        }

        const Eigen::VectorXd current = theta.to_vector();
        const double slack = 1e-12 * (1.0 + std::abs(f));
        bool accepted = false;
        while (!accepted && lambda <= kLambdaMax) {
            Eigen::MatrixXd neg_h = -h;
            neg_h.diagonal().array() += lambda;
            const Eigen::LLT<Eigen::MatrixXd> llt(neg_h);
            if (llt.info() != Eigen::Success) {
                lambda *= 10.0;
                continue;
            }
            const Eigen::VectorXd delta = llt.solve(g);
            double step = 1.0;
            for (int halving = 0; halving <= config.step_halving_max; ++halving, step *= 0.5) {
                Eigen::VectorXd cand = current;
                cand.tail(nfree) += step * delta;
                clamp_eta(cand);
                const Theta trial = Theta::from_vector(cand);
                const double fc = total_loglik(trial, data);
                if (std::isfinite(fc) && fc >= f - slack) {
                    theta = trial;
                    f = fc;
                    accepted = true;
                    break;
                }
            }
            if (!accepted)
                lambda *= 10.0;
        }
        if (!accepted) {
            result.message = "no ascent step found (Levenberg ridge exhausted)";
            break;
        }
        result.loglik_trace.push_back(f);
        lambda = std::max(lambda / 10.0, 1e-6);
    }

    if (!result.converged && result.message.empty()) {
        // Last accepted step may have reached tolerance without a re-check.
        const CLDerivatives der = total_derivatives(theta, data);
        result.grad_inf_norm = der.gradient.tail(nfree).cwiseAbs().maxCoeff();
        if (result.grad_inf_norm < config.grad_tol)
            result.converged = true;
        else
            result.message = "iteration limit reached";
    }

    result.theta_hat = theta;
    result.n_iterations = iter;
    result.loglik = f;
    result.aic = 2.0 * result.q - 2.0 * f;
    result.per_p_table.push_back({p, result.aic, f, result.converged});
    return result;
}

} // namespace

FitResult fit_sgflm(std::span<const Dataset> data, int p, const FitConfig& config)
{
    return fit_model(data, p, config, ModelKind::sgflm);
}

FitResult fit_gflm(std::span<const Dataset> data, int p, const FitConfig& config)
{
    return fit_model(data, p, config, ModelKind::gflm);
}

FitResult select_p_aic(std::span<const Dataset> data, const FitConfig& config, ModelKind model)
{
    if (config.p_candidates.empty())
        throw std::invalid_argument("select_p_aic: no candidate truncation levels");

    std::vector<AicRow> table;
    std::optional<FitResult> best;
    std::string failures;
    for (int p : config.p_candidates) {
        try {
            FitResult fit = fit_model(data, p, config, model);
            table.push_back(fit.per_p_table.front());
            if (fit.converged && (!best || fit.aic < best->aic))
                best = std::move(fit);
        } catch (const std::exception& e) {
            table.push_back({p, std::numeric_limits<double>::quiet_NaN(),
                             std::numeric_limits<double>::quiet_NaN(), false});
            failures += "p=" + std::to_string(p) + ": " + e.what() + "; ";
        }
    }
    if (!best)
        throw NumericalError("select_p_aic: no candidate p produced a converged fit. " + failures);
    best->per_p_table = std::move(table);
    return *best;
}

double adjust_intercept_for_centering(double alpha_hat, const Eigen::VectorXd& beta_hat,
                                      const FunctionGrid& xbar, const BasisSet& basis)
{
    if (beta_hat.size() > basis.num_functions())
        throw std::invalid_argument("adjust_intercept_for_centering: basis too small for beta");
    const ScoreVector xs = project(xbar, basis);
    return alpha_hat + beta_hat.dot(xs.head(beta_hat.size()));
}

double uncentered_intercept(double alpha_centered, const Eigen::VectorXd& beta_hat,
                            const Eigen::VectorXd& xbar_scores)
{
    if (beta_hat.size() > xbar_scores.size())
        throw std::invalid_argument("uncentered_intercept: too few mean scores");
    return alpha_centered - beta_hat.dot(xbar_scores.head(beta_hat.size()));
}

} // namespace sgflm
