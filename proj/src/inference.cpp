#include "sgflm/inference.hpp"

#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "sgflm/errors.hpp"

namespace sgflm {

namespace {

double condition_number(const Eigen::MatrixXd& m, const char* name)
{
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m, Eigen::EigenvaluesOnly);
    const double lo = eig.eigenvalues().minCoeff();
    const double hi = eig.eigenvalues().maxCoeff();
    const double cond = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
    if (!(cond <= kMaxConditionNumber)) {
        std::ostringstream msg;
        msg << name << " is singular or ill-conditioned (eigenvalues in [" << lo << ", " << hi
            << "], condition number " << cond << ")";
        throw NumericalError(msg.str());
    }
    return cond;
}

Eigen::MatrixXd spd_inverse(const Eigen::MatrixXd& m, const char* name)
{
    const Eigen::LLT<Eigen::MatrixXd> llt(m);
    if (llt.info() != Eigen::Success)
        throw NumericalError(std::string(name) + " is not positive definite");
    return llt.solve(Eigen::MatrixXd::Identity(m.rows(), m.cols()));
}

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m)
{
    return 0.5 * (m + m.transpose());
}

double normal_quantile(double prob)
{
    return boost::math::quantile(boost::math::normal_distribution<double>(), prob);
}

} // namespace

SandwichMatrices sandwich_from(const Eigen::MatrixXd& h, const Eigen::MatrixXd& j, bool has_eta)
{
    if (h.rows() != h.cols() || j.rows() != j.cols() || h.rows() != j.rows())
        throw std::invalid_argument("sandwich_from: H and J must be square and the same size");
    if (has_eta && h.rows() < 2)
        throw std::invalid_argument("sandwich_from: need eta and at least an intercept");

    SandwichMatrices sw;
    sw.has_eta = has_eta;
    sw.H = symmetrized(h);
    sw.J = symmetrized(j);
    sw.cond_H = condition_number(sw.H, "H");
    sw.cond_J = condition_number(sw.J, "J");

    const Eigen::MatrixXd h_inv = spd_inverse(sw.H, "H");
    const Eigen::MatrixXd j_inv = spd_inverse(sw.J, "J");
    sw.G = symmetrized(sw.H * j_inv * sw.H);
    sw.G_inv = symmetrized(h_inv * sw.J * h_inv);

    const Eigen::Index k = sw.H.rows();
    if (has_eta) {
        sw.G11_inv = sw.G_inv(0, 0);
        sw.G22_inv = sw.G_inv.bottomRightCorner(k - 1, k - 1);
    } else {
        sw.G11_inv = std::numeric_limits<double>::quiet_NaN();
        sw.G22_inv = sw.G_inv;
    }
    return sw;
}

SandwichMatrices sandwich(std::span<const Dataset> data, const Theta& theta_hat, bool include_eta)
{
    if (data.empty())
        throw std::invalid_argument("sandwich: no replicates");
    const int dim = theta_hat.p() + 2;
    const int offset = include_eta ? 0 : 1;
    const int k = dim - offset;

    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(k, k);
    Eigen::MatrixXd j = Eigen::MatrixXd::Zero(k, k);
    for (const auto& d : data) {
        const CLDerivatives der = composite_loglik_derivatives(theta_hat, d);
        const Eigen::VectorXd g = der.gradient.tail(k);
        h -= der.hessian.bottomRightCorner(k, k);
        j.noalias() += g * g.transpose();
    }
    const double n = static_cast<double>(data.size());
    return sandwich_from(h / n, j / n, include_eta);
}

std::pair<double, double> ci_eta(const SandwichMatrices& sw, double eta_hat, int n_replicates,
                                 double level)
{
    if (!sw.has_eta)
        throw std::invalid_argument("ci_eta: sandwich has no eta coordinate");
    if (!(sw.G11_inv > 0.0))
        throw NumericalError("ci_eta: G11_inv must be positive");
    if (n_replicates < 1 || !(level >= 0.0 && level < 1.0))
        throw std::invalid_argument("ci_eta: need N >= 1 and level in [0,1)");
    const double z = normal_quantile(0.5 * (1.0 + level));
    const double half = z * std::sqrt(sw.G11_inv / n_replicates);
    return {eta_hat - half, eta_hat + half};
}

double quadratic_stat_theta(const SandwichMatrices& sw, const Theta& theta_hat, const Theta& theta0,
                            int n_replicates)
{
    if (!sw.has_eta)
        throw std::invalid_argument("quadratic_stat_theta: sandwich has no eta coordinate");
    if (theta_hat.p() != theta0.p() || theta_hat.p() + 2 != sw.G.rows())
        throw std::invalid_argument("quadratic_stat_theta: dimension mismatch");
    const Eigen::VectorXd d = theta_hat.to_vector() - theta0.to_vector();
    const double k = static_cast<double>(d.size());
    return (n_replicates * d.dot(sw.G * d) - k) / std::sqrt(2.0 * k);
}

double quadratic_stat_beta(const SandwichMatrices& sw, const Eigen::VectorXd& beta_hat_with_alpha,
                           const Eigen::VectorXd& beta0_with_alpha, int n_replicates)
{
    if (beta_hat_with_alpha.size() != beta0_with_alpha.size()
        || beta_hat_with_alpha.size() != sw.G22_inv.rows())
        throw std::invalid_argument("quadratic_stat_beta: dimension mismatch");
    const Eigen::LLT<Eigen::MatrixXd> llt(sw.G22_inv);
    if (llt.info() != Eigen::Success)
        throw NumericalError("quadratic_stat_beta: G22_inv is singular");
    const Eigen::VectorXd d = beta_hat_with_alpha - beta0_with_alpha;
    const double k = static_cast<double>(d.size());
    return (n_replicates * d.dot(llt.solve(d)) - k) / std::sqrt(2.0 * k);
}

ConfidenceBand band_beta(const SandwichMatrices& sw, const Theta& theta_hat, const BasisSet& basis,
                         int n_replicates, double level, BandType type)
{
    const int p = theta_hat.p();
    if (sw.G22_inv.rows() != p + 1)
        throw std::invalid_argument("band_beta: sandwich does not match theta");
    if (p > basis.num_functions())
        throw std::invalid_argument("band_beta: basis smaller than p");
    if (n_replicates < 1 || !(level > 0.0 && level < 1.0))
        throw std::invalid_argument("band_beta: need N >= 1 and level in (0,1)");

    const double crit = type == BandType::simultaneous
        ? std::sqrt(boost::math::quantile(boost::math::chi_squared_distribution<double>(p + 1), level))
        : normal_quantile(0.5 * (1.0 + level));

    const Eigen::VectorXd& t = basis.grid_points();
    ConfidenceBand band;
    band.grid_points = t;
    band.level = level;
    band.simultaneous = type == BandType::simultaneous;
    band.center = reconstruct(theta_hat.beta, basis).values();

    // Variance of beta(t) uses the beta block only; the intercept's loading is 0.
    const Eigen::MatrixXd cov = sw.G22_inv.bottomRightCorner(p, p);
    const Eigen::MatrixXd phi = basis.matrix().leftCols(p);
    Eigen::VectorXd half(t.size());
    for (Eigen::Index r = 0; r < t.size(); ++r) {
        const Eigen::VectorXd f = phi.row(r).transpose();
        const double var = std::max(0.0, f.dot(cov * f)) / n_replicates;
        half[r] = crit * std::sqrt(var);
    }
    band.lower = band.center - half;
    band.upper = band.center + half;
    return band;
}

} // namespace sgflm
