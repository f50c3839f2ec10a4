#include "hrm/hierarchical.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <mutex>
#include <random>
#include <set>
#include <sstream>
#include <thread>

#include "csv.hpp"
#include "hrm/error.hpp"
#include "hrm/random.hpp"

namespace hrm {

namespace {

std::string trim(std::string_view s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

std::optional<double> as_number(std::string_view s) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
    return v;
}

bool is_outcome(const std::string& name) { return FeatureLayout::outcome_slot(name).has_value(); }

std::vector<std::string> term_features(const std::vector<std::string>& terms) {
    std::vector<std::string> out;
    for (const auto& t : expand_terms(terms)) {
        std::size_t start = 0;
        while (true) {
            auto pos = t.find(':', start);
            out.push_back(t.substr(start, pos - start));
            if (pos == std::string::npos) break;
            start = pos + 1;
        }
    }
    return out;
}

const char* kind_name(CovariateKind k) {
    switch (k) {
        case CovariateKind::categorical: return "categorical";
        case CovariateKind::numeric: return "numeric";
        case CovariateKind::date: return "date";
    }
    return "categorical";
}

CovariateKind kind_from(const std::string& s) {
    if (s == "categorical") return CovariateKind::categorical;
    if (s == "numeric") return CovariateKind::numeric;
    if (s == "date") return CovariateKind::date;
    throw ConfigError("unknown covariate kind '" + s + "'");
}

FeatureLayout layout_for(const std::vector<CovariateInfo>& covariates) {
    Portfolio p;
    p.covariates = covariates;
    return FeatureLayout(p);
}

void check_compatible(const HierarchicalModel& model, const Portfolio& portfolio) {
    if (portfolio.covariates.size() != model.covariates.size()) {
        throw InputError("portfolio covariates do not match the model's");
    }
    for (std::size_t i = 0; i < model.covariates.size(); ++i) {
        if (portfolio.covariates[i].name != model.covariates[i].name) {
            throw InputError("portfolio covariate '" + portfolio.covariates[i].name + "' does not match model covariate '" +
                             model.covariates[i].name + "'");
        }
    }
}

double draw(Family family, double mean, double theta, double p, Rng& rng) {
    if (family == Family::bernoulli) {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return u(rng) < mean ? 1.0 : 0.0;
    }
    if (family == Family::poisson) {
        std::poisson_distribution<long> pois(mean);
        return static_cast<double>(pois(rng));
    }
    if (!(mean > 0.0)) throw DomainError("nonpositive predicted gamma mean");
    if (!(theta > 0.0)) return mean;
    double shape = std::pow(mean, 2.0 - p) / theta;
    std::gamma_distribution<double> g(shape, mean / shape);
    double y = g(rng);
    // A tiny shape can underflow to zero; keep the size positive.
    return y > 0.0 ? y : std::numeric_limits<double>::min();
}

// Simulates the future of one claim, calling emit for every simulated record.
template <typename Emit>
void simulate_claim(const HierarchicalModel& model, const Portfolio& portfolio, std::size_t k, FeatureRow& row,
                    Rng& rng, std::optional<int> horizon, Emit&& emit) {
    const auto& claim = portfolio.claims[k];
    const int d = model.window.d;
    const int tau_k = claim.observed_years;
    if (tau_k >= d || portfolio.settled(k)) return;
    auto recs = portfolio.records_of(k);
    const auto& last = recs.back();
    double size_last = last.size;
    double total = last.total_amount_paid + last.size;
    int end = horizon ? std::min(d, tau_k + *horizon) : d;
    const auto& layers = model.spec.layers;
    const auto& filters = model.filters();
    const bool has_payment =
        std::any_of(layers.begin(), layers.end(), [](const LayerSpec& l) { return l.response == "payment"; });
    for (int j = tau_k + 1; j <= end; ++j) {
        set_development(row, claim.reporting_year, j, size_last, total);
        SimulatedRecord rec;
        rec.claim = k;
        rec.dev_year = j;
        for (std::size_t l = 0; l < layers.size(); ++l) {
            const auto& spec = layers[l];
            double y = 0.0;
            if (spec.response == "close" && j == d) {
                y = 1.0;
            } else if (filters[l].matches(row)) {
                const auto& m = *model.layers[l];
                y = draw(m.family(), m.predict(row), m.dispersion(), m.variance_power(), rng);
            }
            row[*FeatureLayout::outcome_slot(spec.response)] = y;
            if (spec.response == "close") rec.close = y != 0.0;
            else if (spec.response == "payment") rec.payment = y != 0.0;
            else rec.size = y;
        }
        if (j == d) rec.close = true;
        if (!has_payment) rec.payment = rec.size > 0.0;
        if (!rec.payment) rec.size = 0.0;
        emit(rec);
        if (rec.close) break;
        size_last = rec.size;
        total += rec.size;
    }
}

template <typename PathFn>
void for_each_path(std::size_t n_paths, int threads, PathFn&& fn) {
    int n_threads = std::clamp<int>(threads, 1, static_cast<int>(std::max<std::size_t>(n_paths, 1)));
    if (n_threads == 1) {
        for (std::size_t p = 0; p < n_paths; ++p) fn(p);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::exception_ptr failure;
    std::mutex failure_mutex;
    for (int t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            try {
                for (std::size_t p; (p = next.fetch_add(1)) < n_paths;) fn(p);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next = n_paths;
            }
        });
    }
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

void check_levels(std::span<const double> levels) {
    for (double q : levels) {
        if (!(q > 0.0 && q < 1.0)) throw ConfigError("quantile levels must lie in (0, 1)");
    }
}

}  // namespace

// ---------------------------------------------------------------- filters

RowFilter RowFilter::parse(const std::string& text) {
    RowFilter f;
    f.text_ = trim(text);
    if (f.text_.empty()) return f;
    std::size_t start = 0;
    while (true) {
        auto pos = f.text_.find("&&", start);
        std::string clause = trim(std::string_view(f.text_).substr(start, pos == std::string::npos ? std::string::npos : pos - start));
        if (clause.empty()) throw ConfigError("empty clause in filter '" + f.text_ + "'");
        static const std::pair<const char*, Op> ops[] = {{"==", Op::eq}, {"!=", Op::ne}, {"<=", Op::le},
                                                         {">=", Op::ge}, {"<", Op::lt},  {">", Op::gt}};
        bool found = false;
        for (const auto& [sym, op] : ops) {
            auto at = clause.find(sym);
            if (at == std::string::npos) continue;
            Condition c;
            c.field = trim(std::string_view(clause).substr(0, at));
            c.op = op;
            c.literal = trim(std::string_view(clause).substr(at + std::char_traits<char>::length(sym)));
            if (c.literal.size() >= 2 && (c.literal.front() == '"' || c.literal.front() == '\'') &&
                c.literal.back() == c.literal.front()) {
                c.literal = c.literal.substr(1, c.literal.size() - 2);
            } else {
                c.number = as_number(c.literal);
            }
            if (c.field.empty() || c.literal.empty()) throw ConfigError("malformed filter clause '" + clause + "'");
            f.conditions_.push_back(std::move(c));
            found = true;
            break;
        }
        if (!found) throw ConfigError("filter clause '" + clause + "' has no comparison operator");
        if (pos == std::string::npos) break;
        start = pos + 2;
    }
    return f;
}

void RowFilter::bind(const FeatureLayout& layout) {
    for (auto& c : conditions_) {
        auto slot = layout.find(c.field);
        if (!slot) throw ConfigError("filter refers to unknown field '" + c.field + "'");
        c.slot = *slot;
    }
}

std::vector<std::string> RowFilter::fields() const {
    std::vector<std::string> out;
    for (const auto& c : conditions_) out.push_back(c.field);
    return out;
}

bool RowFilter::matches(const FeatureRow& row) const {
    for (const auto& c : conditions_) {
        const auto& v = row[c.slot];
        std::optional<double> x;
        const std::string* s = std::get_if<std::string>(&v);
        if (const double* d = std::get_if<double>(&v)) x = *d;
        else if (s) x = as_number(*s);
        else return false;
        int cmp;
        if (c.number && x) {
            cmp = *x < *c.number ? -1 : (*x > *c.number ? 1 : 0);
        } else if (s) {
            cmp = s->compare(c.literal);
            cmp = cmp < 0 ? -1 : (cmp > 0 ? 1 : 0);
        } else {
            return false;
        }
        bool ok = false;
        switch (c.op) {
            case Op::eq: ok = cmp == 0; break;
            case Op::ne: ok = cmp != 0; break;
            case Op::lt: ok = cmp < 0; break;
            case Op::le: ok = cmp <= 0; break;
            case Op::gt: ok = cmp > 0; break;
            case Op::ge: ok = cmp >= 0; break;
        }
        if (!ok) return false;
    }
    return true;
}

// ---------------------------------------------------------------- specs

LayerSpec LayerSpec::from_json(const nlohmann::json& j) {
    try {
        LayerSpec s;
        s.name = j.at("name").get<std::string>();
        s.order = j.at("order").get<int>();
        s.response = j.value("response", s.name);
        s.family = family_from_string(j.at("family").get<std::string>());
        nlohmann::json engine = j.value("engine_config", nlohmann::json::object());
        if (j.contains("engine")) engine["engine"] = j.at("engine");
        s.engine = EngineConfig::from_json(engine);
        s.covariates = j.value("covariates", std::vector<std::string>{});
        s.filter = j.value("filter", std::string());
        return s;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid layer spec: ") + e.what());
    }
}

nlohmann::json LayerSpec::to_json() const {
    auto engine_json = engine.to_json();
    return {{"name", name},
            {"order", order},
            {"response", response},
            {"family", hrm::to_string(family)},
            {"engine", hrm::to_string(engine.kind)},
            {"engine_config", engine_json},
            {"covariates", covariates},
            {"filter", filter}};
}

ModelSpec ModelSpec::from_json(const nlohmann::json& j) {
    ModelSpec m;
    try {
        for (const auto& l : j.at("layers")) m.layers.push_back(LayerSpec::from_json(l));
        m.first_modeled_year = j.value("first_modeled_year", 1);
        m.use_weights = j.value("use_weights", true);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model config: ") + e.what());
    }
    m.validate();
    return m;
}

ModelSpec ModelSpec::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse model config " + path + ": " + e.what());
    }
    return from_json(j);
}

nlohmann::json ModelSpec::to_json() const {
    nlohmann::json layers_json = nlohmann::json::array();
    for (const auto& l : layers) layers_json.push_back(l.to_json());
    return {{"layers", layers_json}, {"first_modeled_year", first_modeled_year}, {"use_weights", use_weights}};
}

ModelSpec ModelSpec::three_layer(std::vector<std::string> covariates, EngineKind engine) {
    ModelSpec m;
    EngineConfig cfg;
    cfg.kind = engine;
    m.layers.push_back({"close", 1, "close", Family::bernoulli, cfg, covariates, ""});
    auto with_close = covariates;
    with_close.push_back("close");
    m.layers.push_back({"payment", 2, "payment", Family::bernoulli, cfg, with_close, ""});
    m.layers.push_back({"size", 3, "size", Family::gamma, cfg, with_close, "payment == 1"});
    m.validate();
    return m;
}

void ModelSpec::validate() {
    if (layers.empty()) throw ConfigError("model needs at least one layer");
    if (first_modeled_year != 1 && first_modeled_year != 2) throw ConfigError("first_modeled_year must be 1 or 2");
    std::sort(layers.begin(), layers.end(), [](const LayerSpec& a, const LayerSpec& b) { return a.order < b.order; });
    std::set<std::string> responses, names;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const auto& l = layers[i];
        if (l.order != static_cast<int>(i) + 1) {
            throw ConfigError("layer orders must be 1..s without gaps (layer '" + l.name + "' has order " +
                              std::to_string(l.order) + ")");
        }
        if (!is_outcome(l.response)) throw ConfigError("layer '" + l.name + "': unknown response '" + l.response + "'");
        if (!responses.insert(l.response).second) throw ConfigError("response '" + l.response + "' modeled twice");
        if (!names.insert(l.name).second) throw ConfigError("duplicate layer name '" + l.name + "'");
        bool binary = l.response != "size";
        if (binary && l.family != Family::bernoulli) throw ConfigError("layer '" + l.name + "' must be bernoulli");
        if (!binary && l.family == Family::bernoulli) throw ConfigError("layer '" + l.name + "' must be gamma or poisson");
        auto check_visible = [&](const std::string& field, const char* where) {
            if (!is_outcome(field)) return;
            bool lower = false;
            for (std::size_t m = 0; m < i; ++m) lower |= layers[m].response == field;
            if (!lower) {
                throw ConfigError("layer '" + l.name + "' " + where + " refers to '" + field +
                                  "', which is not a lower-ordered layer outcome");
            }
        };
        for (const auto& f : term_features(l.covariates)) check_visible(f, "covariate");
        for (const auto& f : RowFilter::parse(l.filter).fields()) check_visible(f, "filter");
    }
}

// ---------------------------------------------------------------- training

WeightVector training_weights(const Portfolio& portfolio, int first_modeled_year, bool enabled) {
    const int tau = portfolio.window.tau;
    const int top = std::min(portfolio.window.d, tau);
    WeightVector w;
    if (!enabled) {
        for (int j = first_modeled_year; j <= portfolio.window.d; ++j) w[j] = 1.0;
        return w;
    }
    std::vector<double> n(portfolio.reported_counts.begin(), portfolio.reported_counts.end());
    auto full = development_year_weights(n, tau, std::min(first_modeled_year, tau));
    for (int j = first_modeled_year; j <= top; ++j) w[j] = full.at(j);
    return w;
}

LayerData layer_training_data(const Portfolio& portfolio, const FeatureLayout& layout, const LayerSpec& spec,
                              const WeightVector& weights, int first_modeled_year) {
    auto filter = RowFilter::parse(spec.filter);
    filter.bind(layout);
    const auto own_slot = *FeatureLayout::outcome_slot(spec.response);
    LayerData data;
    for (std::size_t r = 0; r < portfolio.records.size(); ++r) {
        const auto& rec = portfolio.records[r];
        if (rec.dev_year < first_modeled_year) continue;
        // Settlement is certain in the last development year.
        if (spec.response == "close" && rec.dev_year >= portfolio.window.d) continue;
        auto row = record_row(portfolio, rec, layout);
        // Outcomes of this and higher layers are not visible as covariates.
        row[own_slot] = std::monostate{};
        if (!filter.matches(row)) continue;
        data.rows.push_back(std::move(row));
        data.responses.push_back(outcome_value(rec, spec.response));
        data.weights.push_back(weight_for(weights, rec.dev_year));
        data.records.push_back(r);
    }
    return data;
}

LayerModelPtr default_layer_fitter(const LayerSpec& spec, const FeatureLayout& layout, const LayerData& data) {
    return fit_layer(spec.family, layout, data.rows, spec.covariates, data.responses, data.weights, spec.engine);
}

namespace {

// Hides outcomes of layers at or above `order` in a training row.
void mask_higher(FeatureRow& row, const ModelSpec& spec, std::size_t order_index) {
    for (std::size_t m = order_index; m < spec.layers.size(); ++m) {
        row[*FeatureLayout::outcome_slot(spec.layers[m].response)] = std::monostate{};
    }
}

LayerData masked_data(const HierarchicalModel& model, const Portfolio& portfolio, std::size_t l) {
    auto data = layer_training_data(portfolio, model.layout, model.spec.layers[l], model.weights,
                                    model.spec.first_modeled_year);
    for (auto& row : data.rows) mask_higher(row, model.spec, l);
    return data;
}

}  // namespace

HierarchicalModel fit_hrm(const Portfolio& portfolio, ModelSpec spec, std::optional<WeightVector> weights,
                          const LayerFitter& fitter) {
    spec.validate();
    HierarchicalModel model;
    model.spec = std::move(spec);
    model.window = portfolio.window;
    model.covariates = portfolio.covariates;
    model.layout = FeatureLayout(portfolio);
    model.weights = weights ? *weights
                            : training_weights(portfolio, model.spec.first_modeled_year, model.spec.use_weights);
    for (std::size_t l = 0; l < model.spec.layers.size(); ++l) {
        const auto& ls = model.spec.layers[l];
        auto data = masked_data(model, portfolio, l);
        if (data.rows.empty()) {
            throw InputError("layer '" + ls.name + "' has no training observations" +
                             (ls.filter.empty() ? std::string() : " after filter '" + ls.filter + "'"));
        }
        model.layers.push_back(fitter(ls, model.layout, data));
    }
    model.bind_filters();
    return model;
}

std::vector<double> layer_logliks(const HierarchicalModel& model, const Portfolio& portfolio) {
    if (!model.fitted()) throw StateError("model is not fitted");
    check_compatible(model, portfolio);
    std::vector<double> out;
    for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto data = masked_data(model, portfolio, l);
        out.push_back(weighted_loglik(*model.layers[l], data.rows, data.responses, data.weights));
    }
    return out;
}

// ---------------------------------------------------------------- persistence

void HierarchicalModel::bind_filters() {
    filters_.clear();
    for (const auto& l : spec.layers) {
        auto f = RowFilter::parse(l.filter);
        f.bind(layout);
        filters_.push_back(std::move(f));
    }
}

nlohmann::json HierarchicalModel::to_json() const {
    if (!fitted()) throw StateError("model is not fitted");
    nlohmann::json covs = nlohmann::json::array();
    for (const auto& c : covariates) covs.push_back({{"name", c.name}, {"kind", kind_name(c.kind)}, {"derived", c.derived}});
    nlohmann::json w = nlohmann::json::object();
    for (const auto& [j, v] : weights) w[std::to_string(j)] = v;
    nlohmann::json layer_json = nlohmann::json::array();
    for (const auto& l : layers) layer_json.push_back(l->to_json());
    return {{"format", "hrm-model"},
            {"version", 1},
            {"spec", spec.to_json()},
            {"window", {{"start_year", window.start_year}, {"tau", window.tau}, {"d", window.d}}},
            {"covariates", covs},
            {"weights", w},
            {"layers", layer_json}};
}

HierarchicalModel HierarchicalModel::from_json(const nlohmann::json& j) {
    try {
        if (j.value("format", std::string()) != "hrm-model") throw ConfigError("not a fitted model document");
        if (j.value("version", 0) != 1) throw ConfigError("unsupported model version");
        HierarchicalModel m;
        m.spec = ModelSpec::from_json(j.at("spec"));
        const auto& w = j.at("window");
        m.window = {w.at("start_year").get<int>(), w.at("tau").get<int>(), w.at("d").get<int>()};
        for (const auto& c : j.at("covariates")) {
            m.covariates.push_back(
                {c.at("name").get<std::string>(), kind_from(c.at("kind").get<std::string>()), c.value("derived", false)});
        }
        m.layout = layout_for(m.covariates);
        for (const auto& [k, v] : j.at("weights").items()) m.weights[std::stoi(k)] = v.get<double>();
        for (const auto& l : j.at("layers")) m.layers.push_back(layer_from_json(l, m.layout));
        if (m.layers.size() != m.spec.layers.size()) throw ConfigError("layer count does not match the spec");
        m.bind_filters();
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("invalid model document: ") + e.what());
    }
}

void HierarchicalModel::save(const std::string& path) const { csv::write_file(path, to_json().dump(2) + "\n"); }

HierarchicalModel HierarchicalModel::load(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(csv::read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("cannot parse model " + path + ": " + e.what());
    }
    return from_json(j);
}

// ---------------------------------------------------------------- simulation

std::vector<SimulatedPath> simulate_paths(const HierarchicalModel& model, const Portfolio& portfolio,
                                          const SimulationOptions& options) {
    if (!model.fitted()) throw StateError("model is not fitted");
    if (options.n_paths < 1) throw ConfigError("n_paths must be at least 1");
    if (options.horizon && *options.horizon < 1) throw ConfigError("horizon must be at least 1");
    check_compatible(model, portfolio);
    std::vector<SimulatedPath> paths(options.n_paths);
    for_each_path(options.n_paths, options.threads, [&](std::size_t p) {
        paths[p].path_id = p;
        for (std::size_t k = 0; k < portfolio.claims.size(); ++k) {
            if (portfolio.claims[k].observed_years >= model.window.d || portfolio.settled(k)) continue;
            auto rng = substream(options.seed, p, k);
            auto row = static_row(portfolio, k, model.layout);
            simulate_claim(model, portfolio, k, row, rng, options.horizon,
                           [&](const SimulatedRecord& r) { paths[p].records.push_back(r); });
        }
    });
    return paths;
}

double empirical_quantile(std::vector<double> values, double level) {
    if (values.empty()) throw InputError("no values");
    std::sort(values.begin(), values.end());
    auto n = static_cast<double>(values.size());
    auto idx = static_cast<std::size_t>(std::max(1.0, std::ceil(n * level - 1e-12)));
    return values[std::min(idx, values.size()) - 1];
}

double ReserveReport::quantile(double level) const {
    for (std::size_t i = 0; i < levels.size(); ++i) {
        if (std::abs(levels[i] - level) < 1e-12) return quantiles[i];
    }
    return empirical_quantile(path_totals, level);
}

namespace {

struct PathSummary {
    double total = 0.0;
    std::vector<double> open, payments, size;  // indexed by calendar year - tau - 1
};

ReserveReport finish_report(const std::vector<PathSummary>& summaries, int tau, std::span<const double> levels,
                            std::optional<int> horizon) {
    ReserveReport report;
    report.horizon = horizon;
    report.levels.assign(levels.begin(), levels.end());
    std::size_t years = 0;
    for (const auto& s : summaries) years = std::max(years, s.open.size());
    report.by_year.resize(years);
    double sum = 0.0;
    for (const auto& s : summaries) {
        report.path_totals.push_back(s.total);
        sum += s.total;
        for (std::size_t t = 0; t < s.open.size(); ++t) {
            report.by_year[t].open_claims += s.open[t];
            report.by_year[t].payments += s.payments[t];
            report.by_year[t].total_size += s.size[t];
        }
    }
    auto n = static_cast<double>(summaries.size());
    report.point = sum / n;
    for (std::size_t t = 0; t < years; ++t) {
        auto& y = report.by_year[t];
        y.calendar_year = tau + 1 + static_cast<int>(t);
        y.open_claims /= n;
        y.payments /= n;
        y.total_size /= n;
    }
    for (double q : levels) report.quantiles.push_back(empirical_quantile(report.path_totals, q));
    return report;
}

void accumulate(PathSummary& s, const SimulatedRecord& r, int reporting_year, int tau) {
    auto t = static_cast<std::size_t>(reporting_year + r.dev_year - 1 - tau - 1);
    if (s.open.size() <= t) {
        s.open.resize(t + 1, 0.0);
        s.payments.resize(t + 1, 0.0);
        s.size.resize(t + 1, 0.0);
    }
    s.open[t] += 1.0;
    s.payments[t] += r.payment ? 1.0 : 0.0;
    s.size[t] += r.size;
    s.total += r.size;
}

}  // namespace

ReserveReport rbns_reserve(std::span<const SimulatedPath> paths, const Portfolio& portfolio,
                           std::span<const double> levels, std::optional<int> horizon) {
    if (paths.empty()) throw InputError("no simulated paths");
    check_levels(levels);
    const int tau = portfolio.window.tau;
    std::vector<PathSummary> summaries(paths.size());
    for (std::size_t p = 0; p < paths.size(); ++p) {
        for (const auto& r : paths[p].records) {
            const auto& claim = portfolio.claims[r.claim];
            if (horizon && r.dev_year > claim.observed_years + *horizon) continue;
            accumulate(summaries[p], r, claim.reporting_year, tau);
        }
    }
    return finish_report(summaries, tau, levels, horizon);
}

ReserveReport simulate_reserve(const HierarchicalModel& model, const Portfolio& portfolio,
                               const SimulationOptions& options, std::span<const double> levels) {
    if (!model.fitted()) throw StateError("model is not fitted");
    if (options.n_paths < 1) throw ConfigError("n_paths must be at least 1");
    if (options.horizon && *options.horizon < 1) throw ConfigError("horizon must be at least 1");
    check_levels(levels);
    check_compatible(model, portfolio);
    const int tau = portfolio.window.tau;
    std::vector<std::size_t> open;
    std::vector<FeatureRow> rows;
    for (std::size_t k = 0; k < portfolio.claims.size(); ++k) {
        if (portfolio.claims[k].observed_years >= model.window.d || portfolio.settled(k)) continue;
        open.push_back(k);
        rows.push_back(static_row(portfolio, k, model.layout));
    }
    std::vector<PathSummary> summaries(options.n_paths);
    for_each_path(options.n_paths, options.threads, [&](std::size_t p) {
        FeatureRow row;
        for (std::size_t c = 0; c < open.size(); ++c) {
            std::size_t k = open[c];
            auto rng = substream(options.seed, p, k);
            row = rows[c];
            int r_k = portfolio.claims[k].reporting_year;
            simulate_claim(model, portfolio, k, row, rng, options.horizon,
                           [&](const SimulatedRecord& r) { accumulate(summaries[p], r, r_k, tau); });
        }
    });
    return finish_report(summaries, tau, levels, options.horizon);
}

nlohmann::json ReserveReport::to_json() const {
    nlohmann::json q = nlohmann::json::array();
    for (std::size_t i = 0; i < levels.size(); ++i) q.push_back({{"level", levels[i]}, {"value", quantiles[i]}});
    nlohmann::json years = nlohmann::json::array();
    for (const auto& y : by_year) {
        years.push_back({{"calendar_year", y.calendar_year},
                         {"open_claims", y.open_claims},
                         {"payments", y.payments},
                         {"total_size", y.total_size}});
    }
    nlohmann::json j{{"point_estimate", point}, {"n_paths", path_totals.size()}, {"quantiles", q}, {"by_year", years}};
    j["horizon"] = horizon ? nlohmann::json(*horizon) : nlohmann::json(nullptr);
    return j;
}

std::string ReserveReport::to_csv() const {
    std::ostringstream out;
    out << "path,total\n";
    for (std::size_t p = 0; p < path_totals.size(); ++p) out << p + 1 << ',' << csv::format_double(path_totals[p]) << '\n';
    return out.str();
}

}  // namespace hrm
