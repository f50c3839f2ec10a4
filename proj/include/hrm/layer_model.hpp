#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/design.hpp"
#include "hrm/families.hpp"
#include "hrm/features.hpp"
#include "hrm/gbm.hpp"
#include "hrm/glm.hpp"

namespace hrm {

enum class EngineKind { glm, gbm };

std::string to_string(EngineKind k);
EngineKind engine_from_string(const std::string& s);

struct EngineConfig {
    EngineKind kind = EngineKind::glm;
    GlmOptions glm;
    GbmHyperparameters gbm;
    std::uint64_t seed = 1;

    static EngineConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

/// A fitted regression for one layer. Immutable and safe to share across threads.
class LayerModel {
public:
    virtual ~LayerModel() = default;
    virtual Family family() const = 0;
    /// Probability (bernoulli) or mean (gamma) on the response scale.
    virtual double predict(const FeatureRow& row) const = 0;
    /// Gamma theta; 1 for bernoulli.
    virtual double dispersion() const { return 1.0; }
    virtual double variance_power() const { return 2.0; }
    /// Feature names read by predict().
    virtual std::vector<std::string> features() const = 0;
    virtual std::string engine() const = 0;
    virtual nlohmann::json to_json() const = 0;
};

using LayerModelPtr = std::shared_ptr<const LayerModel>;

class GlmLayer final : public LayerModel {
public:
    GlmLayer(DesignEncoder encoder, GlmFit fit) : encoder_(std::move(encoder)), fit_(std::move(fit)) {}
    Family family() const override { return fit_.family; }
    double predict(const FeatureRow& row) const override;
    double dispersion() const override { return fit_.family == Family::gamma ? fit_.dispersion : 1.0; }
    double variance_power() const override { return fit_.variance_power; }
    std::vector<std::string> features() const override { return encoder_.features(); }
    std::string engine() const override { return "glm"; }
    nlohmann::json to_json() const override;

    const GlmFit& fit() const { return fit_; }
    const DesignEncoder& encoder() const { return encoder_; }

private:
    DesignEncoder encoder_;
    GlmFit fit_;
};

class GbmLayer final : public LayerModel {
public:
    GbmLayer(GbmFit fit, const FeatureLayout& layout, double dispersion)
        : fit_(std::move(fit)), encoder_(fit_, layout), dispersion_(dispersion) {}
    Family family() const override { return fit_.loss; }
    double predict(const FeatureRow& row) const override;
    double dispersion() const override { return dispersion_; }
    std::vector<std::string> features() const override;
    std::string engine() const override { return "gbm"; }
    nlohmann::json to_json() const override;

    const GbmFit& fit() const { return fit_; }

private:
    GbmFit fit_;
    GbmEncoder encoder_;
    double dispersion_;
};

/// Fixed probability or mean, ignoring covariates.
class ConstantLayer final : public LayerModel {
public:
    ConstantLayer(Family family, double mean, double dispersion = 1.0)
        : family_(family), mean_(mean), dispersion_(dispersion) {}
    Family family() const override { return family_; }
    double predict(const FeatureRow&) const override { return mean_; }
    double dispersion() const override { return dispersion_; }
    std::vector<std::string> features() const override { return {}; }
    std::string engine() const override { return "constant"; }
    nlohmann::json to_json() const override;

private:
    Family family_;
    double mean_;
    double dispersion_;
};

/// Fits one layer on the given rows with the configured engine.
LayerModelPtr fit_layer(Family family, const FeatureLayout& layout, std::span<const FeatureRow> rows,
                        std::span<const std::string> covariates, std::span<const double> responses,
                        std::span<const double> weights, const EngineConfig& config);

LayerModelPtr layer_from_json(const nlohmann::json& j, const FeatureLayout& layout);

/// log f(y | row) under the layer's distribution.
double layer_log_density(const LayerModel& model, double y, const FeatureRow& row);

/// sum_i w_i log f(y_i | row_i).
double weighted_loglik(const LayerModel& model, std::span<const FeatureRow> rows, std::span<const double> responses,
                       std::span<const double> weights);

/// Variable importance of a fitted layer, scaled to 100. For GBM this is the
/// split-gain importance; for GLM it is not defined and throws StateError.
std::map<std::string, double> layer_importance(const LayerModel& model);

}  // namespace hrm
