#include "hrm/glm.hpp"

#include <cmath>
#include <sstream>

#include "hrm/error.hpp"

namespace hrm {

namespace {

constexpr double kAliasTolerance = 1e-7;
constexpr double kMaxEta = 30.0;

// Columns that are (numerically) in the span of earlier columns, judged by
// modified Gram-Schmidt on sqrt(w) * X in column order.
std::vector<bool> find_aliased(const Eigen::MatrixXd& x, const Eigen::VectorXd& w) {
    Eigen::VectorXd sw = w.cwiseSqrt();
    std::vector<Eigen::VectorXd> basis;
    std::vector<bool> aliased(static_cast<std::size_t>(x.cols()), false);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        Eigen::VectorXd v = x.col(c).cwiseProduct(sw);
        double norm0 = v.norm();
        for (const auto& q : basis) v -= q.dot(v) * q;
        double norm = v.norm();
        if (norm0 == 0.0 || norm <= kAliasTolerance * norm0) {
            aliased[static_cast<std::size_t>(c)] = true;
            continue;
        }
        basis.push_back(v / norm);
    }
    return aliased;
}

double mean_of(Family family, Link link, double eta) {
    if (family != Family::bernoulli) eta = std::min(eta, 700.0);
    return inverse_link(link, eta);
}

double deviance_of(Family family, const Eigen::VectorXd& eta, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                   double p) {
    Link link = canonical_link(family);
    double dev = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        dev += w[i] * unit_deviance(family, y[i], mean_of(family, link, eta[i]), p);
    }
    return dev;
}

// max_j |sum_i s_ij| / sum_i |x_ij| m_i, where s_ij is the per-observation
// score term and m_i its natural magnitude (w_i for bernoulli, w_i (y_i + mu_i)
// mu_i^(1-p) otherwise). Scale-free in both the weights and the response units.
double relative_gradient(Family family, const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                         const Eigen::VectorXd& y, const Eigen::VectorXd& w, double vp) {
    Link link = canonical_link(family);
    Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd r(y.size()), m(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double mu = mean_of(family, link, eta[i]);
        if (family == Family::bernoulli) {
            r[i] = w[i] * (y[i] - mu);
            m[i] = w[i];
        } else {
            double f = std::pow(mu, 1.0 - vp);
            r[i] = w[i] * (y[i] - mu) * f;
            m[i] = w[i] * (std::abs(y[i]) + mu) * f;
        }
    }
    Eigen::VectorXd num = (x.transpose() * r).cwiseAbs();
    Eigen::VectorXd den = x.cwiseAbs().transpose() * m;
    double worst = 0.0;
    for (Eigen::Index j = 0; j < num.size(); ++j) {
        if (den[j] > 0.0) worst = std::max(worst, num[j] / den[j]);
    }
    return worst;
}

}  // namespace

std::vector<std::string> GlmFit::aliased_columns() const {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < aliased.size(); ++i) {
        if (aliased[i]) out.push_back(i < column_names.size() ? column_names[i] : "x" + std::to_string(i));
    }
    return out;
}

double glm_loglik(Family family, const Eigen::VectorXd& beta, const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& w, double dispersion, double variance_power) {
    Link link = canonical_link(family);
    Eigen::VectorXd eta = x * beta;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        ll += w[i] * log_density(family, y[i], mean_of(family, link, eta[i]), dispersion, variance_power);
    }
    return ll;
}

Eigen::VectorXd glm_score(Family family, const Eigen::VectorXd& beta, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y, const Eigen::VectorXd& w, double dispersion,
                          double variance_power) {
    Link link = canonical_link(family);
    Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd r(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double mu = mean_of(family, link, eta[i]);
        switch (family) {
            case Family::bernoulli:
            case Family::poisson: r[i] = w[i] * (y[i] - mu); break;
            case Family::gamma: r[i] = w[i] * (y[i] - mu) * std::pow(mu, 1.0 - variance_power) / dispersion; break;
        }
    }
    return x.transpose() * r;
}

GlmFit fit_glm(Family family, const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
               std::vector<std::string> column_names, const GlmOptions& options) {
    const Eigen::Index n = x.rows();
    const Eigen::Index p = x.cols();
    if (y.size() != n || w.size() != n) throw InputError("design, response and weight lengths differ");
    if (p == 0) throw InputError("design has no columns");
    const double vp = family == Family::gamma ? options.variance_power : family == Family::poisson ? 1.0 : 2.0;

    double wsum = 0.0, wy = 0.0;
    Eigen::Index n_pos = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (!(w[i] >= 0.0) || !std::isfinite(w[i])) throw DomainError("weights must be finite and nonnegative");
        if (family == Family::bernoulli && y[i] != 0.0 && y[i] != 1.0) throw DomainError("bernoulli responses must be 0 or 1");
        if (family == Family::gamma && !(y[i] > 0.0)) throw DomainError("gamma responses must be positive");
        if (family == Family::poisson && !(y[i] >= 0.0)) throw DomainError("poisson responses must be nonnegative");
        if (w[i] > 0.0) {
            wsum += w[i];
            wy += w[i] * y[i];
            ++n_pos;
        }
    }
    if (!(wsum > 0.0)) throw DomainError("weights must have a positive total");
    if (family == Family::bernoulli && (wy == 0.0 || wy == wsum)) {
        throw DegenerateError("all responses are " + std::string(wy == 0.0 ? "0" : "1") +
                              ": fitted probability on the boundary");
    }
    if (family == Family::poisson && wy == 0.0) throw DegenerateError("all poisson responses are 0");

    GlmFit fit;
    fit.family = family;
    fit.link = canonical_link(family);
    fit.variance_power = vp;
    fit.column_names = std::move(column_names);
    fit.aliased = find_aliased(x, w);
    std::vector<Eigen::Index> kept;
    for (Eigen::Index c = 0; c < p; ++c) {
        if (!fit.aliased[static_cast<std::size_t>(c)]) kept.push_back(c);
    }
    fit.rank = static_cast<int>(kept.size());
    Eigen::MatrixXd xk(n, static_cast<Eigen::Index>(kept.size()));
    for (std::size_t k = 0; k < kept.size(); ++k) xk.col(static_cast<Eigen::Index>(k)) = x.col(kept[k]);

    // Starting values on the response scale.
    Eigen::VectorXd eta(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        double mu0 = family == Family::bernoulli ? (y[i] + 0.5) / 2.0 : family == Family::gamma ? y[i] : y[i] + 0.1;
        eta[i] = apply_link(fit.link, mu0);
    }

    Eigen::VectorXd beta = Eigen::VectorXd::Zero(xk.cols());
    double dev_old = std::numeric_limits<double>::infinity();
    bool have_beta = false;
    Eigen::VectorXd wt(n), z(n);
    double grad_norm = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < options.max_iterations; ++it) {
        for (Eigen::Index i = 0; i < n; ++i) {
            double mu = mean_of(family, fit.link, eta[i]);
            if (family == Family::bernoulli) {
                double v = std::max(mu * (1.0 - mu), 1e-12);
                wt[i] = w[i] * v;
                z[i] = eta[i] + (y[i] - mu) / v;
            } else {
                wt[i] = w[i] * std::pow(mu, 2.0 - vp);
                z[i] = eta[i] + (y[i] - mu) / mu;
            }
        }
        Eigen::MatrixXd xtwx = xk.transpose() * wt.asDiagonal() * xk;
        Eigen::VectorXd xtwz = xk.transpose() * wt.cwiseProduct(z);
        Eigen::LDLT<Eigen::MatrixXd> ldlt(xtwx);
        Eigen::VectorXd beta_new = ldlt.solve(xtwz);
        if (!beta_new.allFinite()) throw ConvergenceError("weighted least squares step is not finite");

        Eigen::VectorXd eta_new = xk * beta_new;
        double dev_new = deviance_of(family, eta_new, y, w, vp);
        int halvings = 0;
        while (have_beta && (!std::isfinite(dev_new) || dev_new > dev_old + 1e-12 * (std::abs(dev_old) + wsum))) {
            if (++halvings > 40) {
                std::ostringstream msg;
                msg << "step halving failed at iteration " << it + 1 << " (deviance " << dev_old << ")";
                throw ConvergenceError(msg.str());
            }
            beta_new = 0.5 * (beta + beta_new);
            eta_new = xk * beta_new;
            dev_new = deviance_of(family, eta_new, y, w, vp);
        }
        double change = std::abs(dev_new - dev_old) / (std::abs(dev_new) + 0.1);
        beta = beta_new;
        eta = eta_new;
        dev_old = dev_new;
        have_beta = true;

        grad_norm = relative_gradient(family, beta, xk, y, w, vp);
        if (grad_norm < options.tolerance * 1e-2 || change < 1e-15) {
            ++it;
            break;
        }
    }
    fit.iterations = it;
    fit.gradient_norm = grad_norm;
    fit.deviance = dev_old;

    if (family == Family::bernoulli) {
        double max_abs_eta = eta.cwiseAbs().maxCoeff();
        if (max_abs_eta > kMaxEta && dev_old < 1e-6 * wsum) {
            throw ConvergenceError("complete separation: fitted probabilities reach 0 or 1 (deviance " +
                                   std::to_string(dev_old) + ", |eta| up to " + std::to_string(max_abs_eta) + ")");
        }
    }
    if (!(grad_norm < options.tolerance)) {
        std::ostringstream msg;
        msg << "no convergence after " << fit.iterations << " iterations (relative gradient " << grad_norm
            << ", deviance " << dev_old << ")";
        throw ConvergenceError(msg.str());
    }

    fit.coefficients = Eigen::VectorXd::Zero(p);
    for (std::size_t k = 0; k < kept.size(); ++k) fit.coefficients[kept[k]] = beta[static_cast<Eigen::Index>(k)];

    if (family == Family::gamma) {
        // Weighted Pearson estimate with weights normalised to mean 1 so that
        // rescaling the weights leaves theta unchanged.
        double pearson = 0.0;
        double mean_w = wsum / static_cast<double>(n_pos);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (w[i] == 0.0) continue;
            double mu = mean_of(family, fit.link, eta[i]);
            pearson += (w[i] / mean_w) * (y[i] - mu) * (y[i] - mu) / std::pow(mu, vp);
        }
        double df = static_cast<double>(n_pos - fit.rank);
        fit.dispersion = df > 0.0 ? pearson / df : 0.0;
    }
    return fit;
}

GlmFit fit_logistic(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                    std::vector<std::string> column_names, const GlmOptions& options) {
    return fit_glm(Family::bernoulli, x, y, w, std::move(column_names), options);
}

GlmFit fit_gamma(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const Eigen::VectorXd& w,
                 std::vector<std::string> column_names, const GlmOptions& options) {
    return fit_glm(Family::gamma, x, y, w, std::move(column_names), options);
}

}  // namespace hrm
