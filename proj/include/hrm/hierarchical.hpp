#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/core_data.hpp"
#include "hrm/features.hpp"
#include "hrm/layer_model.hpp"
#include "hrm/weighting.hpp"

namespace hrm {

/// Conjunction of comparisons such as "payment == 1 && dev_year > 2".
/// Operators: == != < <= > >=. Values are numbers or bare/quoted strings.
/// An empty filter accepts every row.
class RowFilter {
public:
    RowFilter() = default;
    static RowFilter parse(const std::string& text);
    void bind(const FeatureLayout& layout);
    bool matches(const FeatureRow& row) const;
    std::vector<std::string> fields() const;
    const std::string& text() const { return text_; }

private:
    enum class Op { eq, ne, lt, le, gt, ge };
    struct Condition {
        std::string field;
        Op op = Op::eq;
        std::string literal;
        std::optional<double> number;
        std::size_t slot = 0;
    };
    std::string text_;
    std::vector<Condition> conditions_;
};

struct LayerSpec {
    std::string name;
    int order = 1;
    std::string response;  // close, payment or size
    Family family = Family::bernoulli;
    EngineConfig engine;
    std::vector<std::string> covariates;
    std::string filter;

    static LayerSpec from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct ModelSpec {
    std::vector<LayerSpec> layers;  // sorted by order after validation
    int first_modeled_year = 1;
    bool use_weights = true;

    static ModelSpec from_json(const nlohmann::json& j);
    static ModelSpec load(const std::string& path);
    nlohmann::json to_json() const;

    /// Close (bernoulli), payment (bernoulli, given close) and size (gamma,
    /// given payment) with the same covariate list in every layer.
    static ModelSpec three_layer(std::vector<std::string> covariates, EngineKind engine = EngineKind::glm);

    /// Checks orders, responses, families and that covariates and filters only
    /// see lower-ordered current-year outcomes. Sorts layers by order.
    void validate();
};

/// Training observations of one layer after its filter.
struct LayerData {
    std::vector<FeatureRow> rows;
    std::vector<double> responses;
    std::vector<double> weights;
    std::vector<std::size_t> records;  // index into Portfolio::records
};

LayerData layer_training_data(const Portfolio& portfolio, const FeatureLayout& layout, const LayerSpec& spec,
                              const WeightVector& weights, int first_modeled_year);

/// Weights used to train on `portfolio` (1 everywhere when disabled).
WeightVector training_weights(const Portfolio& portfolio, int first_modeled_year, bool enabled = true);

class HierarchicalModel {
public:
    ModelSpec spec;
    ObservationWindow window;
    std::vector<CovariateInfo> covariates;
    FeatureLayout layout;
    WeightVector weights;
    std::vector<LayerModelPtr> layers;  // aligned with spec.layers

    bool fitted() const { return !layers.empty() && layers.size() == spec.layers.size(); }
    nlohmann::json to_json() const;
    static HierarchicalModel from_json(const nlohmann::json& j);
    void save(const std::string& path) const;
    static HierarchicalModel load(const std::string& path);

    /// Filters bound to `layout`, aligned with spec.layers.
    const std::vector<RowFilter>& filters() const { return filters_; }
    void bind_filters();

private:
    std::vector<RowFilter> filters_;
};

using LayerFitter = std::function<LayerModelPtr(const LayerSpec&, const FeatureLayout&, const LayerData&)>;

/// Default fitter: fit_layer with the spec's engine config.
LayerModelPtr default_layer_fitter(const LayerSpec& spec, const FeatureLayout& layout, const LayerData& data);

HierarchicalModel fit_hrm(const Portfolio& portfolio, ModelSpec spec, std::optional<WeightVector> weights = std::nullopt,
                          const LayerFitter& fitter = default_layer_fitter);

/// Weighted log-likelihood of each layer on its filtered observations.
std::vector<double> layer_logliks(const HierarchicalModel& model, const Portfolio& portfolio);

struct SimulatedRecord {
    std::size_t claim = 0;
    int dev_year = 1;
    bool close = false;
    bool payment = false;
    double size = 0.0;
};

struct SimulatedPath {
    std::size_t path_id = 0;
    std::vector<SimulatedRecord> records;
};

struct SimulationOptions {
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    std::optional<int> horizon;  // future development years per claim
    int threads = 1;
};

std::vector<SimulatedPath> simulate_paths(const HierarchicalModel& model, const Portfolio& portfolio,
                                          const SimulationOptions& options);

struct FutureYearSummary {
    int calendar_year = 0;  // window-relative
    double open_claims = 0.0;
    double payments = 0.0;
    double total_size = 0.0;
};

struct ReserveReport {
    double point = 0.0;
    std::vector<double> path_totals;
    std::vector<double> levels;
    std::vector<double> quantiles;
    std::vector<FutureYearSummary> by_year;  // means over paths
    std::optional<int> horizon;

    double quantile(double level) const;
    nlohmann::json to_json() const;
    std::string to_csv() const;
};

/// Empirical quantile: order statistic x_(ceil(n q)).
double empirical_quantile(std::vector<double> values, double level);

ReserveReport rbns_reserve(std::span<const SimulatedPath> paths, const Portfolio& portfolio,
                           std::span<const double> levels, std::optional<int> horizon = std::nullopt);

/// Simulates and aggregates without keeping the paths.
ReserveReport simulate_reserve(const HierarchicalModel& model, const Portfolio& portfolio,
                               const SimulationOptions& options, std::span<const double> levels);

}  // namespace hrm
