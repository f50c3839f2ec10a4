#include "hrm/generator.hpp"

#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "csv.hpp"
#include "hrm/error.hpp"
#include "hrm/random.hpp"

namespace hrm {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double expit(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Shifts a probability on the logit scale; 0 and 1 stay put.
double shift(double p, double delta) {
    if (delta == 0.0 || p <= 0.0 || p >= 1.0) return p;
    return expit(logit(p) + delta);
}

Effects effects_from_json(const nlohmann::json& j) {
    Effects e;
    if (j.is_null()) return e;
    for (const auto& [name, v] : j.items()) {
        if (v.is_number()) {
            e.slopes[name] = v.get<double>();
        } else if (v.is_object()) {
            for (const auto& [level, x] : v.items()) e.levels[name][level] = x.get<double>();
        } else {
            throw ConfigError("effect for '" + name + "' must be a number or a level map");
        }
    }
    return e;
}

nlohmann::json effects_to_json(const Effects& e) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, m] : e.levels) j[name] = m;
    for (const auto& [name, s] : e.slopes) j[name] = s;
    return j;
}

std::vector<double> per_year(const nlohmann::json& j, const char* key, int d) {
    if (!j.contains(key)) throw ConfigError(std::string("generator config needs '") + key + "'");
    const auto& v = j.at(key);
    if (v.is_number()) return std::vector<double>(static_cast<std::size_t>(d), v.get<double>());
    return v.get<std::vector<double>>();
}

struct ClaimState {
    std::vector<std::string> categorical;
    std::vector<double> numeric;
};

double effect(const Effects& e, const std::vector<GeneratedCovariate>& covs, const ClaimState& s) {
    double eta = 0.0;
    for (std::size_t c = 0; c < covs.size(); ++c) {
        const auto& cov = covs[c];
        if (cov.kind == CovariateKind::categorical) {
            auto it = e.levels.find(cov.name);
            if (it == e.levels.end()) continue;
            auto lv = it->second.find(s.categorical[c]);
            if (lv != it->second.end()) eta += lv->second;
        } else {
            auto it = e.slopes.find(cov.name);
            if (it != e.slopes.end()) eta += it->second * s.numeric[c];
        }
    }
    return eta;
}

}  // namespace

void GeneratorConfig::validate() const {
    if (tau < 1 || d < 1) throw ConfigError("tau and d must be at least 1");
    if (claims_per_year.size() != static_cast<std::size_t>(tau)) {
        throw ConfigError("claims_per_year needs " + std::to_string(tau) + " entries");
    }
    for (long n : claims_per_year) {
        if (n < 0) throw ConfigError("claim counts must be nonnegative");
    }
    auto check_len = [&](const std::vector<double>& v, const char* name) {
        if (v.size() != static_cast<std::size_t>(d)) {
            throw ConfigError(std::string(name) + " needs " + std::to_string(d) + " entries");
        }
    };
    check_len(p, "p");
    check_len(q, "q");
    check_len(mu, "mu");
    for (double x : p) {
        if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("settlement probabilities must lie in [0, 1]");
    }
    for (double x : q) {
        if (!(x >= 0.0 && x <= 1.0)) throw ConfigError("payment probabilities must lie in [0, 1]");
    }
    for (double x : mu) {
        if (!(x > 0.0)) throw ConfigError("payment means must be positive");
    }
    if (!(theta > 0.0)) throw ConfigError("theta must be positive");
    if (!gamma.empty()) {
        if (gamma.size() != static_cast<std::size_t>(tau)) throw ConfigError("gamma needs one entry per reporting year");
        for (double g : gamma) {
            if (!(g > 0.0)) throw ConfigError("reporting-year factors must be positive");
        }
    }
    for (const auto& c : covariates) {
        if (c.name.empty()) throw ConfigError("covariate without a name");
        if (c.kind == CovariateKind::categorical) {
            if (c.levels.empty() || c.levels.size() != c.probs.size()) {
                throw ConfigError("covariate '" + c.name + "' needs matching levels and probs");
            }
            double s = std::accumulate(c.probs.begin(), c.probs.end(), 0.0);
            if (std::abs(s - 1.0) > 1e-9) throw ConfigError("probs of covariate '" + c.name + "' must sum to 1");
            for (double x : c.probs) {
                if (!(x >= 0.0)) throw ConfigError("probs of covariate '" + c.name + "' must be nonnegative");
            }
        } else if (c.kind == CovariateKind::numeric) {
            if (!(c.max >= c.min)) throw ConfigError("covariate '" + c.name + "' needs min <= max");
        } else {
            throw ConfigError("generated covariates must be categorical or numeric");
        }
    }
    if (shock) {
        if (shock->reporting_year < 1 || shock->reporting_year > tau) throw ConfigError("shock reporting year outside 1..tau");
        if (shock->extra_claims < 0) throw ConfigError("shock extra_claims must be nonnegative");
        if (shock->mu < 0.0) throw ConfigError("shock mu must be nonnegative");
    }
}

GeneratorConfig GeneratorConfig::from_json(const nlohmann::json& j) {
    GeneratorConfig c;
    try {
        c.seed = j.value("seed", std::uint64_t{1});
        const auto& w = j.at("window");
        c.tau = w.at("tau").get<int>();
        c.d = w.at("d").get<int>();
        const auto& n = j.at("claims_per_year");
        if (n.is_number()) c.claims_per_year.assign(static_cast<std::size_t>(c.tau), n.get<long>());
        else c.claims_per_year = n.get<std::vector<long>>();
        for (const auto& cov : j.value("covariates", nlohmann::json::array())) {
            GeneratedCovariate g;
            g.name = cov.at("name").get<std::string>();
            std::string type = cov.value("type", std::string("categorical"));
            if (type == "categorical") {
                g.kind = CovariateKind::categorical;
                g.levels = cov.at("levels").get<std::vector<std::string>>();
                if (cov.contains("probs")) g.probs = cov.at("probs").get<std::vector<double>>();
                else g.probs.assign(g.levels.size(), 1.0 / static_cast<double>(g.levels.size()));
            } else if (type == "numeric") {
                g.kind = CovariateKind::numeric;
                g.min = cov.value("min", 0.0);
                g.max = cov.value("max", 1.0);
            } else {
                throw ConfigError("unknown covariate type '" + type + "'");
            }
            c.covariates.push_back(std::move(g));
        }
        const auto& close = j.at("close");
        c.p = per_year(close, "p", c.d);
        c.close_effects = effects_from_json(close.value("effects", nlohmann::json()));
        const auto& pay = j.at("payment");
        c.q = per_year(pay, "q", c.d);
        c.close_effect = pay.value("close_effect", 0.0);
        c.payment_effects = effects_from_json(pay.value("effects", nlohmann::json()));
        const auto& size = j.at("size");
        c.mu = per_year(size, "mu", c.d);
        c.theta = size.value("theta", c.theta);
        c.gamma = size.value("reporting_year_factor", std::vector<double>{});
        c.size_effects = effects_from_json(size.value("effects", nlohmann::json()));
        c.multiplicative = j.value("multiplicative", false);
        if (j.contains("shock") && !j.at("shock").is_null()) {
            const auto& s = j.at("shock");
            c.shock = Shock{s.at("reporting_year").get<int>(), s.at("extra_claims").get<long>(), s.value("mu", 0.0)};
        }
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid generator config: ") + e.what());
    }
    c.validate();
    return c;
}

GeneratorConfig GeneratorConfig::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse generator config " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json GeneratorConfig::to_json() const {
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& c : covariates) {
        if (c.kind == CovariateKind::categorical) {
            covs.push_back({{"name", c.name}, {"type", "categorical"}, {"levels", c.levels}, {"probs", c.probs}});
        } else {
            covs.push_back({{"name", c.name}, {"type", "numeric"}, {"min", c.min}, {"max", c.max}});
        }
    }
    nlohmann::json j{{"seed", seed},
                     {"window", {{"tau", tau}, {"d", d}}},
                     {"claims_per_year", claims_per_year},
                     {"covariates", covs},
                     {"close", {{"p", p}, {"effects", effects_to_json(close_effects)}}},
                     {"payment", {{"q", q}, {"close_effect", close_effect}, {"effects", effects_to_json(payment_effects)}}},
                     {"size",
                      {{"mu", mu}, {"theta", theta}, {"reporting_year_factor", gamma}, {"effects", effects_to_json(size_effects)}}},
                     {"multiplicative", multiplicative}};
    if (shock) {
        j["shock"] = {{"reporting_year", shock->reporting_year}, {"extra_claims", shock->extra_claims}, {"mu", shock->mu}};
    }
    return j;
}

GeneratedData generate(const GeneratorConfig& config) {
    config.validate();
    GeneratedData out;
    std::ostringstream csv;
    csv << "claim_id,reporting_year,dev_year,close,payment,size";
    for (const auto& c : config.covariates) csv << ',' << c.name;
    csv << '\n';

    std::vector<int> reporting;
    for (int i = 1; i <= config.tau; ++i) {
        for (long m = 0; m < config.claims_per_year[static_cast<std::size_t>(i - 1)]; ++m) reporting.push_back(i);
    }
    const std::size_t regular = reporting.size();
    if (config.shock) {
        for (long m = 0; m < config.shock->extra_claims; ++m) reporting.push_back(config.shock->reporting_year);
    }
    const int width = std::max<int>(6, static_cast<int>(std::to_string(reporting.size()).size()));

    for (std::size_t k = 0; k < reporting.size(); ++k) {
        auto rng = substream(config.seed, 0, k);
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        const int i = reporting[k];
        ClaimState state;
        state.categorical.resize(config.covariates.size());
        state.numeric.resize(config.covariates.size());
        std::string covariate_text;
        for (std::size_t c = 0; c < config.covariates.size(); ++c) {
            const auto& cov = config.covariates[c];
            if (cov.kind == CovariateKind::categorical) {
                std::discrete_distribution<std::size_t> pick(cov.probs.begin(), cov.probs.end());
                state.categorical[c] = cov.levels[pick(rng)];
                covariate_text += ',' + csv::quote_if_needed(state.categorical[c]);
            } else {
                state.numeric[c] = cov.min + (cov.max - cov.min) * unif(rng);
                covariate_text += ',' + csv::format_double(state.numeric[c]);
            }
        }
        std::string id = std::to_string(k + 1);
        id = "C" + std::string(static_cast<std::size_t>(width) - id.size(), '0') + id;

        const bool shocked = k >= regular;
        const double gamma_i = config.gamma.empty() ? 1.0 : config.gamma[static_cast<std::size_t>(i - 1)];
        auto use = [&](const Effects& e) { return config.multiplicative ? 0.0 : effect(e, config.covariates, state); };
        const double close_shift = use(config.close_effects);
        const double pay_shift = use(config.payment_effects);
        const double size_shift = use(config.size_effects);

        for (int j = 1; j <= config.d; ++j) {
            if (i + j - 1 > config.tau) break;  // censored beyond the observation boundary
            const auto jj = static_cast<std::size_t>(j - 1);
            bool close, payment;
            double size = 0.0;
            if (shocked) {
                close = true;
                payment = true;
                double mu = config.shock->mu > 0.0 ? config.shock->mu : config.mu[0];
                std::gamma_distribution<double> g(1.0 / config.theta, config.theta * mu);
                size = g(rng);
            } else {
                close = j == config.d || unif(rng) < shift(config.p[jj], close_shift);
                double q = shift(config.q[jj], pay_shift + (close ? config.close_effect : 0.0));
                payment = unif(rng) < q;
                if (payment) {
                    double mu = config.mu[jj] * gamma_i * std::exp(size_shift);
                    std::gamma_distribution<double> g(1.0 / config.theta, config.theta * mu);
                    size = g(rng);
                    if (!(size > 0.0)) size = std::numeric_limits<double>::min();
                }
            }
            csv << id << ',' << i << ',' << j << ',' << (close ? 1 : 0) << ',' << (payment ? 1 : 0) << ','
                << csv::format_double(size) << covariate_text << '\n';
            if (close) break;
        }
    }

    out.csv = csv.str();
    for (const auto& c : config.covariates) out.schema.columns.push_back({c.name, c.kind, std::nullopt});
    out.schema.window = ObservationWindow{1, config.tau, config.d};
    out.portfolio = ingest_csv_text(out.csv, out.schema);
    return out;
}

MultiplicativeTruth multiplicative_truth(const GeneratorConfig& config) {
    config.validate();
    MultiplicativeTruth t;
    const auto d = static_cast<std::size_t>(config.d);
    const auto tau = static_cast<std::size_t>(config.tau);
    double open = 1.0;
    for (std::size_t j = 0; j < d; ++j) {
        double p = j + 1 == d ? 1.0 : config.p[j];
        double q_pay = p * shift(config.q[j], config.close_effect) + (1.0 - p) * config.q[j];
        t.open_probability.push_back(open);
        t.pay_probability.push_back(open * q_pay);
        t.mean_size.push_back(config.mu[j]);
        open *= 1.0 - p;
    }
    double bsum = 0.0;
    for (std::size_t j = 0; j < d; ++j) bsum += t.pay_probability[j] * t.mean_size[j];
    for (std::size_t j = 0; j < d; ++j) t.beta.push_back(t.pay_probability[j] * t.mean_size[j] / bsum);
    t.expected_size.assign(tau, std::vector<double>(d, 0.0));
    t.expected_count.assign(tau, std::vector<double>(d, 0.0));
    for (std::size_t i = 0; i < tau; ++i) {
        double n = static_cast<double>(config.claims_per_year[i]);
        double g = config.gamma.empty() ? 1.0 : config.gamma[i];
        t.alpha_tilde.push_back(n * g * bsum);
        for (std::size_t j = 0; j < d; ++j) {
            t.expected_count[i][j] = n * t.pay_probability[j];
            t.expected_size[i][j] = n * g * t.pay_probability[j] * t.mean_size[j];
            if (i + j + 2 > tau + 1) t.rbns += t.expected_size[i][j];
        }
    }
    return t;
}

}  // namespace hrm
