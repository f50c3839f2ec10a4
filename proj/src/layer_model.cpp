#include "hrm/layer_model.hpp"

#include <cmath>

#include "hrm/error.hpp"

namespace hrm {

std::string to_string(EngineKind k) { return k == EngineKind::glm ? "glm" : "gbm"; }

EngineKind engine_from_string(const std::string& s) {
    if (s == "glm") return EngineKind::glm;
    if (s == "gbm") return EngineKind::gbm;
    throw ConfigError("unknown engine '" + s + "' (expected glm or gbm)");
}

EngineConfig EngineConfig::from_json(const nlohmann::json& j) {
    EngineConfig c;
    if (!j.is_object()) throw ConfigError("engine config must be an object");
    c.kind = engine_from_string(j.value("engine", std::string("glm")));
    c.seed = j.value("seed", std::uint64_t{1});
    if (j.contains("glm")) {
        const auto& g = j.at("glm");
        c.glm.tolerance = g.value("tolerance", c.glm.tolerance);
        c.glm.max_iterations = g.value("max_iterations", c.glm.max_iterations);
        c.glm.variance_power = g.value("variance_power", c.glm.variance_power);
    }
    if (j.contains("gbm")) {
        const auto& g = j.at("gbm");
        c.gbm.n_trees = g.value("n_trees", c.gbm.n_trees);
        c.gbm.max_depth = g.value("max_depth", c.gbm.max_depth);
        c.gbm.shrinkage = g.value("shrinkage", c.gbm.shrinkage);
        c.gbm.bag_fraction = g.value("bag_fraction", c.gbm.bag_fraction);
        c.gbm.min_node_weight = g.value("min_node_weight", c.gbm.min_node_weight);
        c.gbm.validate();
    }
    return c;
}

nlohmann::json EngineConfig::to_json() const {
    return {{"engine", hrm::to_string(kind)},
            {"seed", seed},
            {"glm", {{"tolerance", glm.tolerance}, {"max_iterations", glm.max_iterations}, {"variance_power", glm.variance_power}}},
            {"gbm",
             {{"n_trees", gbm.n_trees},
              {"max_depth", gbm.max_depth},
              {"shrinkage", gbm.shrinkage},
              {"bag_fraction", gbm.bag_fraction},
              {"min_node_weight", gbm.min_node_weight}}}};
}

double GlmLayer::predict(const FeatureRow& row) const {
    thread_local std::vector<double> x;
    x.resize(encoder_.n_columns());
    encoder_.encode(row, x);
    double eta = 0.0;
    for (std::size_t c = 0; c < x.size(); ++c) eta += x[c] * fit_.coefficients[static_cast<Eigen::Index>(c)];
    if (fit_.family != Family::bernoulli) eta = std::min(eta, 700.0);
    return inverse_link(fit_.link, eta);
}

nlohmann::json GlmLayer::to_json() const {
    std::vector<double> coef(fit_.coefficients.data(), fit_.coefficients.data() + fit_.coefficients.size());
    std::vector<int> aliased(fit_.aliased.begin(), fit_.aliased.end());
    return {{"engine", "glm"},
            {"family", hrm::to_string(fit_.family)},
            {"link", hrm::to_string(fit_.link)},
            {"design", encoder_.to_json()},
            {"coefficients", coef},
            {"aliased", aliased},
            {"dispersion", fit_.dispersion},
            {"variance_power", fit_.variance_power},
            {"iterations", fit_.iterations},
            {"gradient_norm", fit_.gradient_norm},
            {"deviance", fit_.deviance},
            {"rank", fit_.rank}};
}

double GbmLayer::predict(const FeatureRow& row) const {
    thread_local GbmInput in;
    encoder_.encode(row, in);
    return gbm_predict(fit_, in);
}

std::vector<std::string> GbmLayer::features() const {
    std::vector<std::string> out;
    for (const auto& f : fit_.features) out.push_back(f.name);
    return out;
}

nlohmann::json GbmLayer::to_json() const {
    return {{"engine", "gbm"}, {"dispersion", dispersion_}, {"fit", fit_.to_json()}};
}

nlohmann::json ConstantLayer::to_json() const {
    return {{"engine", "constant"}, {"family", hrm::to_string(family_)}, {"mean", mean_}, {"dispersion", dispersion_}};
}

LayerModelPtr fit_layer(Family family, const FeatureLayout& layout, std::span<const FeatureRow> rows,
                        std::span<const std::string> covariates, std::span<const double> responses,
                        std::span<const double> weights, const EngineConfig& config) {
    if (rows.empty()) throw InputError("no training rows");
    if (config.kind == EngineKind::glm) {
        auto encoder = DesignEncoder::build(layout, covariates, rows);
        Eigen::MatrixXd x = encoder.encode_all(rows);
        Eigen::Map<const Eigen::VectorXd> y(responses.data(), static_cast<Eigen::Index>(responses.size()));
        Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
        auto fit = fit_glm(family, x, y, w, encoder.column_names(), config.glm);
        return std::make_shared<GlmLayer>(std::move(encoder), std::move(fit));
    }
    auto features = expand_terms(covariates);
    std::vector<std::string> plain;
    for (const auto& f : features) {
        if (f.find(':') == std::string::npos) plain.push_back(f);
    }
    auto fit = fit_gbm(layout, rows, plain, responses, family, weights, config.gbm, config.seed);
    double theta = 1.0;
    if (family == Family::gamma) {
        // Pearson estimate on the training rows, weights normalised to mean 1.
        GbmEncoder enc(fit, layout);
        GbmInput in;
        double wsum = 0.0, pearson = 0.0;
        std::size_t n_pos = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (weights[i] <= 0.0) continue;
            enc.encode(rows[i], in);
            double mu = gbm_predict(fit, in);
            pearson += weights[i] * (responses[i] - mu) * (responses[i] - mu) / (mu * mu);
            wsum += weights[i];
            ++n_pos;
        }
        theta = n_pos > 1 ? pearson * static_cast<double>(n_pos) / wsum / static_cast<double>(n_pos - 1) : 0.0;
    }
    return std::make_shared<GbmLayer>(std::move(fit), layout, theta);
}

LayerModelPtr layer_from_json(const nlohmann::json& j, const FeatureLayout& layout) {
    const std::string engine = j.at("engine").get<std::string>();
    if (engine == "glm") {
        GlmFit fit;
        fit.family = family_from_string(j.at("family").get<std::string>());
        fit.link = canonical_link(fit.family);
        auto coef = j.at("coefficients").get<std::vector<double>>();
        fit.coefficients = Eigen::Map<Eigen::VectorXd>(coef.data(), static_cast<Eigen::Index>(coef.size()));
        for (int a : j.at("aliased").get<std::vector<int>>()) fit.aliased.push_back(a != 0);
        fit.dispersion = j.at("dispersion").get<double>();
        fit.variance_power = j.value("variance_power", 2.0);
        fit.iterations = j.value("iterations", 0);
        fit.gradient_norm = j.value("gradient_norm", 0.0);
        fit.deviance = j.value("deviance", 0.0);
        fit.rank = j.value("rank", 0);
        auto encoder = DesignEncoder::from_json(j.at("design"), layout);
        fit.column_names = encoder.column_names();
        if (fit.coefficients.size() != static_cast<Eigen::Index>(encoder.n_columns())) {
            throw ConfigError("coefficient count does not match the design");
        }
        return std::make_shared<GlmLayer>(std::move(encoder), std::move(fit));
    }
    if (engine == "gbm") {
        return std::make_shared<GbmLayer>(GbmFit::from_json(j.at("fit")), layout, j.at("dispersion").get<double>());
    }
    if (engine == "constant") {
        return std::make_shared<ConstantLayer>(family_from_string(j.at("family").get<std::string>()),
                                               j.at("mean").get<double>(), j.value("dispersion", 1.0));
    }
    throw ConfigError("unknown layer engine '" + engine + "'");
}

double layer_log_density(const LayerModel& model, double y, const FeatureRow& row) {
    double mean = model.predict(row);
    return log_density(model.family(), y, mean, model.dispersion(), model.variance_power());
}

double weighted_loglik(const LayerModel& model, std::span<const FeatureRow> rows, std::span<const double> responses,
                       std::span<const double> weights) {
    if (rows.size() != responses.size() || rows.size() != weights.size()) {
        throw InputError("row, response and weight counts differ");
    }
    double ll = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (weights[i] == 0.0) continue;
        ll += weights[i] * layer_log_density(model, responses[i], rows[i]);
    }
    return ll;
}

std::map<std::string, double> layer_importance(const LayerModel& model) {
    if (const auto* g = dynamic_cast<const GbmLayer*>(&model)) return gbm_importance(g->fit());
    throw StateError("split importance is only defined for gbm layers");
}

}  // namespace hrm
