#include "hrm/aggregate.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include "csv.hpp"
#include "hrm/error.hpp"
#include "hrm/features.hpp"
#include "hrm/layer_model.hpp"
#include "hrm/hierarchical.hpp"

namespace hrm {

// ---------------------------------------------------------------- triangles

double Triangle::at(std::size_t i, std::size_t j) const {
    if (!cells[i][j]) {
        throw InputError("cell (" + std::to_string(i + 1) + ", " + std::to_string(j + 1) + ") is not observed");
    }
    return *cells[i][j];
}

std::size_t Triangle::age(std::size_t i) const {
    std::size_t a = 0;
    while (a < cols() && cells[i][a]) ++a;
    return a;
}

Triangle Triangle::from_rows(const std::vector<std::vector<double>>& values, std::vector<double> exposure) {
    Triangle t;
    std::size_t cols = 0;
    for (const auto& r : values) cols = std::max(cols, r.size());
    for (const auto& r : values) {
        std::vector<std::optional<double>> row(cols);
        for (std::size_t j = 0; j < r.size(); ++j) row[j] = r[j];
        t.cells.push_back(std::move(row));
    }
    t.exposure = std::move(exposure);
    t.validate();
    return t;
}

void Triangle::validate() const {
    for (std::size_t i = 0; i < rows(); ++i) {
        if (cells[i].size() != cols()) throw InputError("triangle rows have different lengths");
        std::size_t a = age(i);
        for (std::size_t j = a; j < cols(); ++j) {
            if (cells[i][j]) throw InputError("row " + std::to_string(i + 1) + " has an observed cell after a gap");
        }
        for (std::size_t j = 0; j < a; ++j) {
            if (!std::isfinite(*cells[i][j])) throw InputError("triangle cells must be finite");
        }
    }
    if (!exposure.empty() && exposure.size() != rows()) throw InputError("exposure length differs from the row count");
}

Triangle build_triangle(const Portfolio& portfolio, const std::string& layer) {
    const auto tau = static_cast<std::size_t>(portfolio.window.tau);
    const auto d = static_cast<std::size_t>(portfolio.window.d);
    Triangle t;
    t.layer = layer;
    t.cells.assign(tau, std::vector<std::optional<double>>(d));
    for (std::size_t i = 0; i < tau; ++i) {
        for (std::size_t j = 0; j < d && i + j < tau; ++j) t.cells[i][j] = 0.0;
    }
    for (const auto& rec : portfolio.records) {
        auto i = static_cast<std::size_t>(portfolio.claims[rec.claim].reporting_year - 1);
        auto j = static_cast<std::size_t>(rec.dev_year - 1);
        *t.cells[i][j] += outcome_value(rec, layer);
    }
    for (long n : portfolio.reported_counts) t.exposure.push_back(static_cast<double>(n));
    return t;
}

Triangle parse_triangle_csv(const std::string& text) {
    auto table = csv::parse(text);
    if (table.empty() || table[0].empty() || table[0][0] != "reporting_year") {
        throw InputError("line 1: expected a header starting with 'reporting_year'");
    }
    const auto& header = table[0];
    bool has_exposure = header.back() == "exposure";
    std::size_t width = header.size() - 1 - (has_exposure ? 1 : 0);
    Triangle t;
    t.layer = "size";
    for (std::size_t r = 1; r < table.size(); ++r) {
        const auto& fields = table[r];
        std::string where = "line " + std::to_string(r + 1);
        if (fields.size() == 1 && fields[0].empty()) continue;
        if (fields.size() != header.size()) {
            throw InputError(where + ": expected " + std::to_string(header.size()) + " fields");
        }
        std::vector<std::optional<double>> row(width);
        for (std::size_t j = 0; j < width; ++j) {
            const auto& f = fields[j + 1];
            if (f.empty()) continue;
            double v = 0.0;
            if (!csv::parse_double(f, v)) throw InputError(where + ": bad number '" + f + "'");
            row[j] = v;
        }
        t.cells.push_back(std::move(row));
        if (has_exposure) {
            double v = 0.0;
            if (!csv::parse_double(fields.back(), v)) throw InputError(where + ": bad exposure '" + fields.back() + "'");
            t.exposure.push_back(v);
        }
    }
    if (t.cells.empty()) throw InputError("triangle has no rows");
    t.validate();
    return t;
}

Triangle read_triangle_csv(const std::string& path) { return parse_triangle_csv(csv::read_file(path)); }

std::string triangle_to_csv(const Triangle& t) {
    std::ostringstream out;
    out << "reporting_year";
    for (std::size_t j = 0; j < t.cols(); ++j) out << ',' << j + 1;
    if (!t.exposure.empty()) out << ",exposure";
    out << '\n';
    for (std::size_t i = 0; i < t.rows(); ++i) {
        out << i + 1;
        for (std::size_t j = 0; j < t.cols(); ++j) {
            out << ',';
            if (t.cells[i][j]) out << csv::format_double(*t.cells[i][j]);
        }
        if (!t.exposure.empty()) out << ',' << csv::format_double(t.exposure[i]);
        out << '\n';
    }
    return out.str();
}

// ---------------------------------------------------------------- chain ladder

namespace {

std::vector<std::vector<double>> cumulate(const Triangle& t) {
    std::vector<std::vector<double>> c(t.rows(), std::vector<double>(t.cols(), 0.0));
    for (std::size_t i = 0; i < t.rows(); ++i) {
        double s = 0.0;
        for (std::size_t j = 0; j < t.age(i); ++j) {
            s += *t.cells[i][j];
            c[i][j] = s;
        }
    }
    return c;
}

// Rows contributing to factor j (linking column j-1 to j), 0-based column j >= 1.
std::vector<std::size_t> factor_rows(const Triangle& t, std::size_t j) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        if (t.age(i) > j) out.push_back(i);
    }
    return out;
}

nlohmann::json vec_json(const std::vector<double>& v) { return v; }

}  // namespace

ChainLadderResult chain_ladder(const Triangle& t) {
    t.validate();
    ChainLadderResult r;
    auto c = cumulate(t);
    const std::size_t cols = t.cols();
    for (std::size_t j = 1; j < cols; ++j) {
        auto rows = factor_rows(t, j);
        if (rows.empty()) throw EstimabilityError("no observed cells for development factor " + std::to_string(j + 1));
        double num = 0.0, den = 0.0;
        for (auto i : rows) {
            num += c[i][j];
            den += c[i][j - 1];
        }
        if (!(den > 0.0)) {
            throw DegenerateError("zero cumulative column sum for development factor " + std::to_string(j + 1));
        }
        r.factors.push_back(num / den);
    }
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::size_t a = t.age(i);
        if (a == 0) throw InputError("row " + std::to_string(i + 1) + " has no observed cells");
        for (std::size_t j = a; j < cols; ++j) c[i][j] = c[i][j - 1] * r.factors[j - 1];
        r.latest.push_back(c[i][a - 1]);
        r.ultimate.push_back(c[i][cols - 1]);
        r.reserve.push_back(r.ultimate.back() - r.latest.back());
        r.total_reserve += r.reserve.back();
    }
    r.cumulative = std::move(c);
    return r;
}

double chain_ladder_reserve(const ChainLadderResult& cl, const Triangle& t, std::optional<int> horizon) {
    if (!horizon) return cl.total_reserve;
    if (*horizon < 1) throw ConfigError("horizon must be at least 1");
    double total = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::size_t a = t.age(i);
        std::size_t end = std::min(t.cols(), a + static_cast<std::size_t>(*horizon));
        if (end > a) total += cl.cumulative[i][end - 1] - cl.cumulative[i][a - 1];
    }
    return total;
}

nlohmann::json ChainLadderResult::to_json() const {
    return {{"factors", vec_json(factors)},
            {"latest", vec_json(latest)},
            {"ultimate", vec_json(ultimate)},
            {"reserve", vec_json(reserve)},
            {"total_reserve", total_reserve}};
}

MackResult mack_se(const Triangle& t, double level) {
    if (t.rows() < 3) throw EstimabilityError("Mack variance needs at least 3 rows (got " + std::to_string(t.rows()) + ")");
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
    auto cl = chain_ladder(t);
    auto c = cumulate(t);
    const std::size_t cols = t.cols();
    MackResult m;
    m.level = level;
    std::vector<double> col_sum(cols, 0.0);  // S_j: sum of C_{i,j-1} over rows used for f_j
    std::vector<bool> estimable(cols, false);
    m.sigma2.assign(cols > 0 ? cols - 1 : 0, 0.0);
    for (std::size_t j = 1; j < cols; ++j) {
        auto rows = factor_rows(t, j);
        double f = cl.factors[j - 1];
        double s = 0.0;
        for (auto i : rows) {
            col_sum[j] += c[i][j - 1];
            if (c[i][j - 1] > 0.0) {
                double dev = c[i][j] / c[i][j - 1] - f;
                s += c[i][j - 1] * dev * dev;
            }
        }
        if (rows.size() >= 2) {
            m.sigma2[j - 1] = s / static_cast<double>(rows.size() - 1);
            estimable[j] = true;
        }
    }
    for (std::size_t j = 1; j < cols; ++j) {
        if (estimable[j]) continue;
        // Tail rule: min(s_{j-1}^4 / s_{j-2}^2, s_{j-2}^2, s_{j-1}^2), or the previous value when only one exists.
        if (j >= 3) {
            double a = m.sigma2[j - 3], b = m.sigma2[j - 2];
            double ratio = a > 0.0 ? b * b / a : (b > 0.0 ? std::numeric_limits<double>::infinity() : 0.0);
            m.sigma2[j - 1] = std::min({ratio, a, b});
        } else if (j >= 2) {
            m.sigma2[j - 1] = m.sigma2[j - 2];
        } else {
            throw EstimabilityError("variance of development factor 2 is not estimable");
        }
    }
    // Per-row mean squared error and covariance terms.
    auto term = [&](std::size_t j) { return m.sigma2[j - 1] / (cl.factors[j - 1] * cl.factors[j - 1]); };
    double total_mse = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::size_t a = t.age(i);
        double sum = 0.0;
        for (std::size_t j = a; j < cols; ++j) {
            double cij = cl.cumulative[i][j - 1];
            if (cij > 0.0) sum += term(j) * (1.0 / cij + 1.0 / col_sum[j]);
        }
        double u = cl.ultimate[i];
        double mse = u * u * sum;
        m.row_se.push_back(std::sqrt(mse));
        total_mse += mse;
    }
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t l = i + 1; l < t.rows(); ++l) {
            std::size_t a = std::max(t.age(i), t.age(l));
            double sum = 0.0;
            for (std::size_t j = a; j < cols; ++j) sum += 2.0 * term(j) / col_sum[j];
            total_mse += cl.ultimate[i] * cl.ultimate[l] * sum;
        }
    }
    m.total_se = std::sqrt(total_mse);
    m.reserve = cl.total_reserve;
    boost::math::normal_distribution<double> normal;
    double z = boost::math::quantile(normal, 0.5 + level / 2.0);
    m.lower = m.reserve - z * m.total_se;
    m.upper = m.reserve + z * m.total_se;
    return m;
}

nlohmann::json MackResult::to_json() const {
    return {{"sigma2", vec_json(sigma2)}, {"row_se", vec_json(row_se)}, {"total_se", total_se},
            {"reserve", reserve},         {"level", level},              {"lower", lower},
            {"upper", upper}};
}

// ---------------------------------------------------------------- multiplicative

MultiplicativeFit fit_multiplicative(const Triangle& t, const MultiplicativeOptions& options) {
    t.validate();
    const std::size_t rows = t.rows(), cols = t.cols();
    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    std::vector<std::size_t> ages(rows);
    for (std::size_t i = 0; i < rows; ++i) {
        ages[i] = t.age(i);
        for (std::size_t j = 0; j < ages[i]; ++j) {
            double x = *t.cells[i][j];
            if (x < 0.0) throw DomainError("multiplicative fit needs nonnegative cells");
            row_sum[i] += x;
            col_sum[j] += x;
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        if (!(row_sum[i] > 0.0) && !options.allow_zero_margins) {
            throw EstimabilityError("row " + std::to_string(i + 1) + " has no positive observed cell");
        }
    }
    for (std::size_t j = 0; j < cols; ++j) {
        bool seen = false;
        for (std::size_t i = 0; i < rows; ++i) seen |= ages[i] > j;
        if (!seen) throw EstimabilityError("column " + std::to_string(j + 1) + " has no observed cell");
        if (!(col_sum[j] > 0.0) && !options.allow_zero_margins) {
            throw EstimabilityError("column " + std::to_string(j + 1) + " has no positive observed cell");
        }
    }

    MultiplicativeFit fit;
    fit.beta.assign(cols, 0.0);
    fit.alpha.assign(rows, 0.0);
    // Start from column sums; the alternating updates are the exact Poisson score equations.
    double total = 0.0;
    for (double s : col_sum) total += s;
    for (std::size_t j = 0; j < cols; ++j) fit.beta[j] = total > 0.0 ? col_sum[j] / total : 1.0 / static_cast<double>(cols);
    for (int it = 1; it <= options.max_iterations; ++it) {
        for (std::size_t i = 0; i < rows; ++i) {
            double b = 0.0;
            for (std::size_t j = 0; j < ages[i]; ++j) b += fit.beta[j];
            fit.alpha[i] = b > 0.0 ? row_sum[i] / b : 0.0;
        }
        double change = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double a = 0.0;
            for (std::size_t i = 0; i < rows; ++i) {
                if (ages[i] > j) a += fit.alpha[i];
            }
            double nb = a > 0.0 ? col_sum[j] / a : 0.0;
            change = std::max(change, std::abs(nb - fit.beta[j]) / std::max(std::abs(nb), 1e-300));
            fit.beta[j] = nb;
        }
        double bs = 0.0;
        for (double b : fit.beta) bs += b;
        for (auto& b : fit.beta) b /= bs;
        for (auto& a : fit.alpha) a *= bs;
        fit.iterations = it;
        if (change < options.tolerance) break;
        if (it == options.max_iterations) throw ConvergenceError("multiplicative fit did not converge");
    }
    // Final alpha consistent with the normalised beta.
    for (std::size_t i = 0; i < rows; ++i) {
        double b = 0.0;
        for (std::size_t j = 0; j < ages[i]; ++j) b += fit.beta[j];
        fit.alpha[i] = b > 0.0 ? row_sum[i] / b : 0.0;
    }
    return fit;
}

double multiplicative_reserve(const MultiplicativeFit& fit, const Triangle& t, std::optional<int> horizon) {
    if (horizon && *horizon < 1) throw ConfigError("horizon must be at least 1");
    double total = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        std::size_t a = t.age(i);
        std::size_t end = horizon ? std::min(t.cols(), a + static_cast<std::size_t>(*horizon)) : t.cols();
        for (std::size_t j = a; j < end; ++j) total += fit.fitted(i, j);
    }
    return total;
}

double multiplicative_loglik(const MultiplicativeFit& fit, const Triangle& t) {
    double ll = 0.0;
    for (std::size_t i = 0; i < t.rows(); ++i) {
        for (std::size_t j = 0; j < t.age(i); ++j) {
            double x = *t.cells[i][j];
            double m = fit.fitted(i, j);
            if (m <= 0.0) {
                if (x > 0.0) return -std::numeric_limits<double>::infinity();
                continue;
            }
            ll += log_density(Family::poisson, x, m);
        }
    }
    return ll;
}

nlohmann::json MultiplicativeFit::to_json() const {
    return {{"alpha", vec_json(alpha)}, {"beta", vec_json(beta)}, {"iterations", iterations}};
}

// ---------------------------------------------------------------- DCL and CRM

namespace {

void check_pair(const Triangle& counts, const Triangle& sizes) {
    if (counts.rows() != sizes.rows() || counts.cols() != sizes.cols()) {
        throw InputError("count and size triangles differ in shape");
    }
    if (counts.exposure.size() != counts.rows()) throw InputError("count triangle needs the reported counts");
    for (std::size_t i = 0; i < counts.rows(); ++i) {
        if (counts.age(i) != sizes.age(i)) throw InputError("count and size triangles differ in observed region");
    }
}

// Payments per reported claim: sum of counts over sum of exposures, per column.
std::vector<double> per_claim_rates(const Triangle& counts) {
    std::vector<double> rate;
    for (std::size_t j = 0; j < counts.cols(); ++j) {
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < counts.rows(); ++i) {
            if (!counts.observed(i, j)) continue;
            num += *counts.cells[i][j];
            den += counts.exposure[i];
        }
        if (!(den > 0.0)) throw EstimabilityError("zero exposure for development year " + std::to_string(j + 1));
        rate.push_back(num / den);
    }
    return rate;
}

}  // namespace

DclResult dcl_rbns(const Triangle& counts, const Triangle& sizes, std::optional<int> horizon) {
    check_pair(counts, sizes);
    DclResult r;
    r.pi = per_claim_rates(counts);
    MultiplicativeOptions opt;
    opt.allow_zero_margins = true;
    r.size_fit = fit_multiplicative(sizes, opt);
    const auto& n = counts.exposure;
    std::size_t ref = 0;
    while (ref < n.size() && !(n[ref] > 0.0 && r.size_fit.alpha[ref] > 0.0)) ++ref;
    if (ref == n.size()) throw EstimabilityError("no reporting year with claims and payments");
    double c = r.size_fit.alpha[ref] / n[ref];
    for (std::size_t i = 0; i < n.size(); ++i) r.gamma.push_back(n[i] > 0.0 ? r.size_fit.alpha[i] / (n[i] * c) : 0.0);
    for (std::size_t j = 0; j < sizes.cols(); ++j) r.mu.push_back(r.pi[j] > 0.0 ? c * r.size_fit.beta[j] / r.pi[j] : 0.0);
    for (std::size_t i = 0; i < sizes.rows(); ++i) {
        std::size_t a = sizes.age(i);
        std::size_t end = horizon ? std::min(sizes.cols(), a + static_cast<std::size_t>(*horizon)) : sizes.cols();
        for (std::size_t j = a; j < end; ++j) r.reserve += n[i] * r.pi[j] * r.mu[j] * r.gamma[i];
    }
    return r;
}

DclResult dcl_rbns(const Portfolio& portfolio, std::optional<int> horizon) {
    return dcl_rbns(build_triangle(portfolio, "payment"), build_triangle(portfolio, "size"), horizon);
}

nlohmann::json DclResult::to_json() const {
    return {{"pi", vec_json(pi)}, {"mu", vec_json(mu)}, {"gamma", vec_json(gamma)}, {"reserve", reserve}};
}

CrmResult crm_rbns(const Triangle& counts, const Triangle& sizes, std::optional<int> horizon) {
    check_pair(counts, sizes);
    CrmResult r;
    r.lambda = per_claim_rates(counts);
    const std::size_t rows = sizes.rows(), cols = sizes.cols();
    // E X2_ij = X1_ij alpha_i beta_j with observed counts as exposure.
    std::vector<std::size_t> ages(rows);
    std::vector<double> row_sum(rows, 0.0), col_sum(cols, 0.0);
    for (std::size_t i = 0; i < rows; ++i) {
        ages[i] = sizes.age(i);
        for (std::size_t j = 0; j < ages[i]; ++j) {
            if (*counts.cells[i][j] < 0.0) throw DomainError("payment counts must be nonnegative");
            if (*counts.cells[i][j] == 0.0 && *sizes.cells[i][j] != 0.0) {
                throw InputError("payments without a payment count in cell (" + std::to_string(i + 1) + ", " +
                                 std::to_string(j + 1) + ")");
            }
            row_sum[i] += *sizes.cells[i][j];
            col_sum[j] += *sizes.cells[i][j];
        }
    }
    r.alpha.assign(rows, 1.0);
    r.beta.assign(cols, 1.0 / static_cast<double>(cols));
    for (int it = 0; it < 100000; ++it) {
        for (std::size_t i = 0; i < rows; ++i) {
            double e = 0.0;
            for (std::size_t j = 0; j < ages[i]; ++j) e += *counts.cells[i][j] * r.beta[j];
            r.alpha[i] = e > 0.0 ? row_sum[i] / e : 0.0;
        }
        double change = 0.0;
        for (std::size_t j = 0; j < cols; ++j) {
            double e = 0.0;
            for (std::size_t i = 0; i < rows; ++i) {
                if (ages[i] > j) e += *counts.cells[i][j] * r.alpha[i];
            }
            double nb = e > 0.0 ? col_sum[j] / e : 0.0;
            change = std::max(change, std::abs(nb - r.beta[j]) / std::max(std::abs(nb), 1e-300));
            r.beta[j] = nb;
        }
        double bs = 0.0;
        for (double b : r.beta) bs += b;
        if (!(bs > 0.0)) throw EstimabilityError("size triangle has no positive cell");
        for (auto& b : r.beta) b /= bs;
        for (auto& a : r.alpha) a *= bs;
        if (change < 1e-14) break;
    }
    // Columns never observed with payments have no size information.
    for (std::size_t j = 0; j < cols; ++j) {
        double e = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
            if (ages[i] > j) e += *counts.cells[i][j];
        }
        if (e == 0.0 && r.lambda[j] > 0.0) {
            throw EstimabilityError("no observed payments to estimate sizes in development year " + std::to_string(j + 1));
        }
    }
    for (std::size_t i = 0; i < rows; ++i) {
        std::size_t end = horizon ? std::min(cols, ages[i] + static_cast<std::size_t>(*horizon)) : cols;
        for (std::size_t j = ages[i]; j < end; ++j) r.reserve += counts.exposure[i] * r.lambda[j] * r.alpha[i] * r.beta[j];
    }
    return r;
}

CrmResult crm_rbns(const Portfolio& portfolio, std::optional<int> horizon) {
    return crm_rbns(build_triangle(portfolio, "payment"), build_triangle(portfolio, "size"), horizon);
}

nlohmann::json CrmResult::to_json() const {
    return {{"lambda", vec_json(lambda)}, {"alpha", vec_json(alpha)}, {"beta", vec_json(beta)}, {"reserve", reserve}};
}

// ---------------------------------------------------------------- likelihood ratio tests

LrtResult lrt_bridge(double loglik_full, double loglik_reduced, double dof) {
    if (!(dof > 0.0)) throw ConfigError("degrees of freedom must be positive");
    LrtResult r;
    r.loglik_full = loglik_full;
    r.loglik_reduced = loglik_reduced;
    r.dof = dof;
    double stat = 2.0 * (loglik_full - loglik_reduced);
    double tol = 1e-8 * std::max(1.0, std::abs(loglik_full));
    if (stat < -tol) {
        throw NestingError("full model fits worse than the reduced model (statistic " + std::to_string(stat) + ")");
    }
    r.statistic = std::max(0.0, stat);
    boost::math::chi_squared_distribution<double> chi(dof);
    r.p_value = r.statistic == 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(chi, r.statistic));
    return r;
}

LrtResult joint_lrt(const std::vector<LrtResult>& tests) {
    if (tests.empty()) throw InputError("no tests to combine");
    double full = 0.0, reduced = 0.0, dof = 0.0;
    for (const auto& t : tests) {
        full += t.loglik_full;
        reduced += t.loglik_reduced;
        dof += t.dof;
    }
    LrtResult r;
    r.loglik_full = full;
    r.loglik_reduced = reduced;
    r.dof = dof;
    for (const auto& t : tests) r.statistic += t.statistic;
    boost::math::chi_squared_distribution<double> chi(dof);
    r.p_value = r.statistic == 0.0 ? 1.0 : boost::math::cdf(boost::math::complement(chi, r.statistic));
    return r;
}

nlohmann::json LrtResult::to_json() const {
    return {{"statistic", statistic},
            {"dof", dof},
            {"p_value", p_value},
            {"loglik_full", loglik_full},
            {"loglik_reduced", loglik_reduced}};
}

LrtResult bridge_test(const Portfolio& portfolio, const BridgeLayer& layer) {
    if (layer.extra_covariates.empty()) throw ConfigError("bridge test needs at least one extra covariate");
    FeatureLayout layout(portfolio);
    LayerSpec spec;
    spec.name = layer.response;
    spec.response = layer.response;
    spec.family = layer.family;
    spec.filter = layer.filter;
    WeightVector unit;
    for (int j = 1; j <= portfolio.window.d; ++j) unit[j] = 1.0;
    auto data = layer_training_data(portfolio, layout, spec, unit, 1);
    if (data.rows.empty()) throw InputError("no observations for the bridge test layer");
    // Current-year outcomes other than lower layers are never covariates here.
    std::vector<std::string> reduced{"reporting_year", "dev_year"};
    std::vector<std::string> full = reduced;
    full.insert(full.end(), layer.extra_covariates.begin(), layer.extra_covariates.end());

    auto fit = [&](const std::vector<std::string>& terms) {
        auto enc = DesignEncoder::build(layout, terms, data.rows);
        Eigen::MatrixXd x = enc.encode_all(data.rows);
        Eigen::Map<const Eigen::VectorXd> y(data.responses.data(), static_cast<Eigen::Index>(data.responses.size()));
        Eigen::VectorXd w = Eigen::VectorXd::Ones(x.rows());
        auto g = fit_glm(layer.family, x, y, w, enc.column_names());
        return std::make_tuple(g, x, y, w);
    };
    auto [gf, xf, yf, wf] = fit(full);
    auto [gr, xr, yr, wr] = fit(reduced);
    // Gamma layers share the full model's dispersion so the difference is a deviance difference.
    double theta = layer.family == Family::gamma ? gf.dispersion : 1.0;
    double llf = glm_loglik(layer.family, gf.coefficients, xf, yf, wf, theta, gf.variance_power);
    double llr = glm_loglik(layer.family, gr.coefficients, xr, yr, wr, theta, gr.variance_power);
    return lrt_bridge(llf, llr, static_cast<double>(gf.rank - gr.rank));
}

double bridge_reserve(const Portfolio& portfolio, std::optional<int> horizon) {
    if (horizon && *horizon < 1) throw ConfigError("horizon must be at least 1");
    FeatureLayout layout(portfolio);
    const int tau = portfolio.window.tau, d = portfolio.window.d;
    std::vector<FeatureRow> rows;
    std::vector<double> y;
    std::vector<std::vector<double>> paid(portfolio.claims.size());
    for (const auto& rec : portfolio.records) {
        auto& v = paid[rec.claim];
        if (v.size() < static_cast<std::size_t>(rec.dev_year)) v.resize(static_cast<std::size_t>(rec.dev_year), 0.0);
        v[static_cast<std::size_t>(rec.dev_year - 1)] = rec.size;
    }
    auto make_row = [&](int i, int j) {
        FeatureRow row(layout.size());
        row[FeatureLayout::kReportingYear] = std::to_string(i);
        row[FeatureLayout::kDevYear] = std::to_string(j);
        return row;
    };
    for (std::size_t k = 0; k < portfolio.claims.size(); ++k) {
        int i = portfolio.claims[k].reporting_year;
        for (int j = 1; j <= std::min(d, tau - i + 1); ++j) {
            rows.push_back(make_row(i, j));
            const auto& v = paid[k];
            y.push_back(static_cast<std::size_t>(j) <= v.size() ? v[static_cast<std::size_t>(j - 1)] : 0.0);
        }
    }
    std::vector<double> w(y.size(), 1.0);
    EngineConfig cfg;
    cfg.glm.tolerance = 1e-10;
    std::vector<std::string> terms{"reporting_year", "dev_year"};
    auto model = fit_layer(Family::poisson, layout, rows, terms, y, w, cfg);
    double total = 0.0;
    for (int i = 1; i <= tau; ++i) {
        int age = std::min(d, tau - i + 1);
        int end = horizon ? std::min(d, age + *horizon) : d;
        double n = static_cast<double>(portfolio.reported_counts[static_cast<std::size_t>(i - 1)]);
        for (int j = age + 1; j <= end; ++j) total += n * model->predict(make_row(i, j));
    }
    return total;
}

}  // namespace hrm
