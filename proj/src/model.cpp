#include "sgflm/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "sgflm/errors.hpp"

namespace sgflm {

Eigen::VectorXd Theta::to_vector() const
{
    Eigen::VectorXd v(p() + 2);
    v[0] = eta;
    v[1] = alpha;
    v.tail(p()) = beta;
    return v;
}

Theta Theta::from_vector(const Eigen::VectorXd& v)
{
    if (v.size() < 2)
        throw std::invalid_argument("Theta::from_vector: need at least eta and alpha");
    return Theta{v[0], v[1], v.tail(v.size() - 2)};
}

Eigen::VectorXd Theta::regression_vector() const
{
    Eigen::VectorXd v(p() + 1);
    v[0] = alpha;
    v.tail(p()) = beta;
    return v;
}

void check_theta(const Theta& theta, double eta_max)
{
    if (!std::isfinite(theta.eta) || !std::isfinite(theta.alpha) || !theta.beta.allFinite())
        throw std::invalid_argument("theta has non-finite entries");
    if (std::abs(theta.eta) > eta_max)
        throw std::invalid_argument("|eta| = " + std::to_string(std::abs(theta.eta))
                                    + " exceeds eta_max = " + std::to_string(eta_max));
}

void Dataset::validate() const
{
    const int n = lattice.size();
    if (scores.rows() != n)
        throw DataError("scores have " + std::to_string(scores.rows()) + " rows, lattice has "
                        + std::to_string(n) + " sites");
    if (responses.size() != n)
        throw DataError("responses have " + std::to_string(responses.size())
                        + " entries, lattice has " + std::to_string(n) + " sites");
    if (!scores.allFinite())
        throw DataError("scores contain non-finite values");
    for (int i = 0; i < n; ++i)
        if (responses[i] != 0.0 && responses[i] != 1.0)
            throw DataError("response at site " + std::to_string(i) + " is not 0/1");
}

CLDerivatives& CLDerivatives::operator+=(const CLDerivatives& other)
{
    value += other.value;
    gradient += other.gradient;
    hessian += other.hessian;
    return *this;
}

double logistic(double x)
{
    if (x >= 0.0)
        return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

double log1p_exp(double x)
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

namespace {

void check_truncation(const Theta& theta, const Eigen::MatrixXd& scores)
{
    if (theta.p() > scores.cols())
        throw std::invalid_argument("truncation level p = " + std::to_string(theta.p())
                                    + " exceeds the " + std::to_string(scores.cols())
                                    + " available scores");
}

void check_site(const Dataset& data, int i)
{
    if (i < 0 || i >= data.num_sites())
        throw std::out_of_range("site index " + std::to_string(i) + " out of range");
}

} // namespace

Eigen::VectorXd linear_predictor(const Theta& theta, const Eigen::MatrixXd& scores)
{
    check_truncation(theta, scores);
    Eigen::VectorXd lp = Eigen::VectorXd::Constant(scores.rows(), theta.alpha);
    if (theta.p() > 0)
        lp.noalias() += scores.leftCols(theta.p()) * theta.beta;
    return lp;
}

double kappa(const Theta& theta, const Eigen::Ref<const Eigen::VectorXd>& scores_row)
{
    if (theta.p() > scores_row.size())
        throw std::invalid_argument("kappa: score row shorter than p");
    return logistic(theta.alpha + scores_row.head(theta.p()).dot(theta.beta));
}

double natural_parameter(const Theta& theta, const Dataset& data, int i)
{
    check_site(data, i);
    check_truncation(theta, data.scores);
    const auto row = [&](int s) { return theta.alpha + data.scores.row(s).head(theta.p()).dot(theta.beta); };
    double a = row(i);
    for (int j : data.lattice.neighbors(i))
        a += theta.eta * (data.responses[j] - logistic(row(j)));
    return a;
}

double conditional_probability(const Theta& theta, const Dataset& data, int i)
{
    return logistic(natural_parameter(theta, data, i));
}

Eigen::VectorXd natural_parameters(const Theta& theta, const Dataset& data)
{
    const Eigen::VectorXd lp = linear_predictor(theta, data.scores);
    const int n = data.num_sites();
    Eigen::VectorXd resid(n);
    for (int i = 0; i < n; ++i)
        resid[i] = data.responses[i] - logistic(lp[i]);
    Eigen::VectorXd a = lp;
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j : data.lattice.neighbors(i))
            s += resid[j];
        a[i] += theta.eta * s;
    }
    return a;
}

double composite_loglik(const Theta& theta, const Dataset& data)
{
    const Eigen::VectorXd a = natural_parameters(theta, data);
    double value = 0.0;
    for (int i = 0; i < data.num_sites(); ++i)
        value += a[i] * data.responses[i] - log1p_exp(a[i]);
    return value;
}

CLDerivatives composite_loglik_derivatives(const Theta& theta, const Dataset& data)
{
    const int n = data.num_sites();
    const int p = theta.p();
    const int q = p + 1; // alpha, beta_1..beta_p
    const double eta = theta.eta;
    const Eigen::VectorXd& y = data.responses;

    // Design rows x_i = (1, eps_i1..eps_ip).
    Eigen::MatrixXd x(n, q);
    x.col(0).setOnes();
    if (p > 0)
        x.rightCols(p) = data.scores.leftCols(p);

    const Eigen::VectorXd lp = linear_predictor(theta, data.scores);
    Eigen::VectorXd kap(n), w(n), c(n), resid(n);
    for (int i = 0; i < n; ++i) {
        kap[i] = logistic(lp[i]);
        w[i] = kap[i] * (1.0 - kap[i]);
        c[i] = w[i] * (1.0 - 2.0 * kap[i]);
        resid[i] = y[i] - kap[i];
    }

    // S_i = sum_{N_i}(y_j - kappa_j); M_i = sum_{N_i} w_j x_j.
    Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, q);
    for (int i = 0; i < n; ++i) {
        for (int j : data.lattice.neighbors(i)) {
            s[i] += resid[j];
            m.row(i) += w[j] * x.row(j);
        }
    }

    const Eigen::VectorXd a = lp + eta * s;
    Eigen::VectorXd e(n), v(n);
    CLDerivatives out;
    for (int i = 0; i < n; ++i) {
        const double pi = logistic(a[i]);
        e[i] = y[i] - pi;
        v[i] = pi * (1.0 - pi);
        out.value += a[i] * y[i] - log1p_exp(a[i]);
    }

    // dA_i/db = x_i - eta M_i; dA_i/deta = S_i.
    const Eigen::MatrixXd d = x - eta * m;

    out.gradient.resize(q + 1);
    out.gradient[0] = e.dot(s);
    out.gradient.tail(q).noalias() = d.transpose() * e;

    // Second-order term through kappa_j inside the neighbor sums:
    // sum_i e_i d2A_i/db2 = -eta sum_j c_j (sum_{i in N_j} e_i) x_j x_j^T.
    Eigen::VectorXd ebar = Eigen::VectorXd::Zero(n);
    for (int j = 0; j < n; ++j)
        for (int i : data.lattice.neighbors(j))
            ebar[j] += e[i];

    out.hessian.resize(q + 1, q + 1);
    out.hessian(0, 0) = -v.dot(s.cwiseProduct(s));
    const Eigen::VectorXd h_eta_b = -(d.transpose() * v.cwiseProduct(s)) - m.transpose() * e;
    out.hessian.block(1, 0, q, 1) = h_eta_b;
    out.hessian.block(0, 1, 1, q) = h_eta_b.transpose();
    Eigen::MatrixXd h_bb = -(d.transpose() * v.asDiagonal() * d);
    h_bb.noalias() -= eta * (x.transpose() * (c.cwiseProduct(ebar)).asDiagonal() * x);
    out.hessian.block(1, 1, q, q) = 0.5 * (h_bb + h_bb.transpose());
    return out;
}

double total_loglik(const Theta& theta, std::span<const Dataset> data)
{
    double total = 0.0;
    for (const auto& d : data)
        total += composite_loglik(theta, d);
    return total;
}

CLDerivatives total_derivatives(const Theta& theta, std::span<const Dataset> data)
{
    if (data.empty())
        throw std::invalid_argument("total_derivatives: no replicates");
    CLDerivatives total = composite_loglik_derivatives(theta, data[0]);
    for (std::size_t k = 1; k < data.size(); ++k)
        total += composite_loglik_derivatives(theta, data[k]);
    return total;
}

} // namespace sgflm
