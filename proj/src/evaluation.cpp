#include "hrm/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "hrm/aggregate.hpp"
#include "hrm/error.hpp"
#include "hrm/selection.hpp"

namespace hrm {

std::string to_string(ReservingMethod m) {
    switch (m) {
        case ReservingMethod::hrm: return "hrm";
        case ReservingMethod::chain_ladder: return "chain_ladder";
        case ReservingMethod::dcl: return "dcl";
        case ReservingMethod::crm: return "crm";
        case ReservingMethod::bridge: return "bridge";
    }
    return "hrm";
}

ReservingMethod method_from_string(const std::string& s) {
    for (auto m : {ReservingMethod::hrm, ReservingMethod::chain_ladder, ReservingMethod::dcl, ReservingMethod::crm,
                   ReservingMethod::bridge}) {
        if (to_string(m) == s) return m;
    }
    throw ConfigError("unknown reserving method '" + s + "' (expected hrm, chain_ladder, dcl, crm or bridge)");
}

EvaluationModel EvaluationModel::from_json(const nlohmann::json& j) {
    EvaluationModel m;
    try {
        m.method = method_from_string(j.value("method", std::string("hrm")));
        m.name = j.value("name", to_string(m.method));
        if (j.contains("spec")) m.spec = ModelSpec::from_json(j.at("spec"));
        if (m.method == ReservingMethod::hrm && m.spec.layers.empty()) {
            throw ConfigError("model '" + m.name + "' needs a spec with layers");
        }
        m.select = j.value("select", std::vector<std::string>{});
        m.folds = j.value("folds", 5);
        m.n_paths = j.value("paths", std::size_t{1000});
        m.seed = j.value("seed", std::uint64_t{1});
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("evaluation model: ") + e.what());
    }
    if (m.folds < 2) throw ConfigError("folds must be at least 2");
    if (m.n_paths == 0) throw ConfigError("paths must be positive");
    return m;
}

nlohmann::json EvaluationModel::to_json() const {
    nlohmann::json j{{"name", name}, {"method", to_string(method)}};
    if (method == ReservingMethod::hrm) {
        j["spec"] = spec.to_json();
        j["select"] = select;
        j["folds"] = folds;
        j["paths"] = n_paths;
        j["seed"] = seed;
    }
    return j;
}

EvaluationConfig EvaluationConfig::from_json(const nlohmann::json& j) {
    EvaluationConfig c;
    try {
        c.dates = j.at("dates").get<std::vector<int>>();
        c.horizon = j.value("horizon", 2);
        if (j.contains("cap") && !j.at("cap").is_null()) c.cap = j.at("cap").get<double>();
        c.interval_level = j.value("interval_level", 0.95);
        c.threads = j.value("threads", 1);
        for (const auto& m : j.at("models")) c.models.push_back(EvaluationModel::from_json(m));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("evaluation config: ") + e.what());
    }
    return c;
}

EvaluationConfig EvaluationConfig::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json EvaluationConfig::to_json() const {
    nlohmann::json j{{"dates", dates}, {"horizon", horizon}, {"interval_level", interval_level}, {"threads", threads}};
    j["cap"] = cap ? nlohmann::json(*cap) : nlohmann::json(nullptr);
    j["models"] = nlohmann::json::array();
    for (const auto& m : models) j["models"].push_back(m.to_json());
    return j;
}

std::optional<double> percentage_error(double predicted, double actual, std::optional<double> cap) {
    if (actual == 0.0 || !std::isfinite(actual) || !std::isfinite(predicted)) return std::nullopt;
    double pe = (predicted - actual) / actual * 100.0;
    if (cap) pe = std::clamp(pe, -*cap, *cap);
    return pe;
}

double realized_total(const Portfolio& portfolio, int cutoff, int horizon) {
    double total = 0.0;
    for (const auto& rec : portfolio.records) {
        int i = portfolio.claims[rec.claim].reporting_year;
        int cal = i + rec.dev_year - 1;
        if (i <= cutoff && cal > cutoff && cal <= cutoff + horizon) total += rec.size;
    }
    return total;
}

namespace {

void validate(const Portfolio& portfolio, const EvaluationConfig& config) {
    if (config.models.empty()) throw ConfigError("no models to evaluate");
    if (config.dates.empty()) throw ConfigError("no evaluation dates");
    if (config.horizon < 1) throw ConfigError("horizon must be at least 1");
    if (config.cap && !(*config.cap > 0.0)) throw ConfigError("cap must be positive");
    if (!(config.interval_level > 0.0 && config.interval_level < 1.0)) {
        throw ConfigError("interval_level must lie in (0, 1)");
    }
    for (std::size_t k = 1; k < config.dates.size(); ++k) {
        if (config.dates[k] <= config.dates[k - 1]) throw ConfigError("evaluation dates must be strictly increasing");
    }
    const int first = portfolio.window.start_year;
    const int last = first + portfolio.window.tau - 1;
    for (int date : config.dates) {
        if (date < first || date + config.horizon > last) {
            throw ConfigError("date " + std::to_string(date) + " with horizon " + std::to_string(config.horizon) +
                              " is outside the data range " + std::to_string(first) + ".." + std::to_string(last));
        }
    }
    std::vector<std::string> names;
    for (const auto& m : config.models) {
        if (std::find(names.begin(), names.end(), m.name) != names.end()) {
            throw ConfigError("duplicate model name '" + m.name + "'");
        }
        names.push_back(m.name);
    }
}

// Adds the selected candidates to each layer, using data up to the first date.
ModelSpec select_covariates(const Portfolio& train, const EvaluationModel& m, int threads) {
    ModelSpec spec = m.spec;
    spec.validate();
    if (m.select.empty()) return spec;
    FeatureLayout layout(train);
    auto weights = training_weights(train, spec.first_modeled_year, spec.use_weights);
    for (auto& layer : spec.layers) {
        std::vector<std::string> candidates;
        for (const auto& c : m.select) {
            if (std::find(layer.covariates.begin(), layer.covariates.end(), c) != layer.covariates.end()) continue;
            if (std::find(kOutcomeFields.begin(), kOutcomeFields.end(), c) != kOutcomeFields.end()) continue;
            candidates.push_back(c);
        }
        if (candidates.empty()) continue;
        auto data = layer_training_data(train, layout, layer, weights, spec.first_modeled_year);
        if (data.rows.empty()) continue;
        auto folds = assign_folds(data.rows.size(), m.folds, m.seed);
        auto result = forward_select(layer.family, layout, data.rows, data.responses, data.weights, folds,
                                     layer.covariates, candidates, layer.engine, threads);
        layer.covariates.insert(layer.covariates.end(), result.selected.begin(), result.selected.end());
    }
    return spec;
}

EvaluationEntry evaluate_one(const Portfolio& portfolio, const EvaluationConfig& config, const EvaluationModel& m,
                             const ModelSpec& spec, int date) {
    EvaluationEntry e;
    e.date = date;
    e.cutoff = date - portfolio.window.start_year + 1;
    e.model = m.name;
    const int h = config.horizon;
    auto train = truncate(portfolio, e.cutoff);
    const double lo = (1.0 - config.interval_level) / 2.0, hi = (1.0 + config.interval_level) / 2.0;
    switch (m.method) {
        case ReservingMethod::hrm: {
            auto model = fit_hrm(train, spec, std::nullopt, m.fitter);
            SimulationOptions opt;
            opt.n_paths = m.n_paths;
            opt.seed = m.seed;
            opt.horizon = h;
            std::vector<double> levels{lo, hi};
            auto report = simulate_reserve(model, train, opt, levels);
            e.predicted = report.point;
            e.lower = report.quantiles[0];
            e.upper = report.quantiles[1];
            break;
        }
        case ReservingMethod::chain_ladder: {
            auto tri = build_triangle(train, "size");
            auto cl = chain_ladder(tri);
            e.predicted = chain_ladder_reserve(cl, tri, h);
            if (tri.rows() >= 3) {
                auto mack = mack_se(tri, config.interval_level);
                double z = (mack.upper - mack.reserve) / (mack.total_se > 0.0 ? mack.total_se : 1.0);
                e.lower = e.predicted - z * mack.total_se;
                e.upper = e.predicted + z * mack.total_se;
            }
            break;
        }
        case ReservingMethod::dcl: e.predicted = dcl_rbns(train, h).reserve; break;
        case ReservingMethod::crm: e.predicted = crm_rbns(train, h).reserve; break;
        case ReservingMethod::bridge: e.predicted = bridge_reserve(train, h); break;
    }
    e.actual = realized_total(portfolio, e.cutoff, h);
    e.pe = percentage_error(e.predicted, e.actual, config.cap);
    return e;
}

}  // namespace

EvaluationRun moving_window_eval(const Portfolio& portfolio, const EvaluationConfig& config) {
    validate(portfolio, config);
    int threads = config.threads == 0 ? static_cast<int>(std::max(1u, std::thread::hardware_concurrency()))
                                      : std::max(1, config.threads);
    EvaluationRun run;
    run.horizon = config.horizon;
    std::vector<ModelSpec> specs(config.models.size());
    auto first = truncate(portfolio, config.dates.front() - portfolio.window.start_year + 1);
    for (std::size_t k = 0; k < config.models.size(); ++k) {
        const auto& m = config.models[k];
        run.models.push_back(m.name);
        if (m.method != ReservingMethod::hrm) continue;
        specs[k] = select_covariates(first, m, threads);
        run.specs.emplace_back(m.name, specs[k]);
    }

    const std::size_t n_models = config.models.size();
    const std::size_t n_tasks = config.dates.size() * n_models;
    run.entries.resize(n_tasks);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t t = next++; t < n_tasks; t = next++) {
            try {
                std::size_t k = t % n_models;
                run.entries[t] = evaluate_one(portfolio, config, config.models[k], specs[k], config.dates[t / n_models]);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_tasks;
            }
        }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < std::min<int>(threads, static_cast<int>(n_tasks)); ++w) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
    return run;
}

std::string EvaluationRun::to_csv() const {
    std::ostringstream out;
    out << "date,model,predicted,actual,pe,lower,upper\n";
    for (const auto& e : entries) {
        out << e.date << ',' << csv::quote_if_needed(e.model) << ',' << csv::format_double(e.predicted) << ','
            << csv::format_double(e.actual) << ',';
        if (e.pe) out << csv::format_double(*e.pe);
        out << ',';
        if (e.lower) out << csv::format_double(*e.lower);
        out << ',';
        if (e.upper) out << csv::format_double(*e.upper);
        out << '\n';
    }
    return out.str();
}

nlohmann::json EvaluationRun::to_json() const {
    nlohmann::json j{{"horizon", horizon}, {"models", models}, {"entries", nlohmann::json::array()}};
    for (const auto& e : entries) {
        nlohmann::json x{{"date", e.date},           {"cutoff", e.cutoff}, {"model", e.model},
                         {"predicted", e.predicted}, {"actual", e.actual}};
        x["pe"] = e.pe ? nlohmann::json(*e.pe) : nlohmann::json(nullptr);
        if (e.lower) x["lower"] = *e.lower;
        if (e.upper) x["upper"] = *e.upper;
        j["entries"].push_back(x);
    }
    nlohmann::json s = nlohmann::json::object();
    for (const auto& [name, spec] : specs) s[name] = spec.to_json();
    j["specs"] = s;
    return j;
}

nlohmann::json EvaluationSummary::to_json() const {
    return {{"model", model}, {"mean_pe", mean_pe}, {"mean_abs_pe", mean_abs_pe}, {"n", n}, {"excluded", excluded}};
}

std::vector<EvaluationSummary> summarize(const EvaluationRun& run) {
    if (run.entries.empty()) throw StateError("evaluation run is empty");
    std::vector<EvaluationSummary> out;
    for (const auto& name : run.models) {
        EvaluationSummary s;
        s.model = name;
        for (const auto& e : run.entries) {
            if (e.model != name) continue;
            if (!e.pe) {
                ++s.excluded;
                continue;
            }
            ++s.n;
            s.mean_pe += *e.pe;
            s.mean_abs_pe += std::abs(*e.pe);
        }
        if (s.n == 0) throw StateError("model '" + name + "' has no defined percentage errors");
        s.mean_pe /= static_cast<double>(s.n);
        s.mean_abs_pe /= static_cast<double>(s.n);
        out.push_back(s);
    }
    return out;
}

nlohmann::json summary_json(const EvaluationRun& run) {
    nlohmann::json j = nlohmann::json::array();
    for (const auto& s : summarize(run)) j.push_back(s.to_json());
    return j;
}

}  // namespace hrm
