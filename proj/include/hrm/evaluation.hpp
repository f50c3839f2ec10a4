#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/core_data.hpp"
#include "hrm/hierarchical.hpp"

namespace hrm {

enum class ReservingMethod { hrm, chain_ladder, dcl, crm, bridge };

std::string to_string(ReservingMethod m);
ReservingMethod method_from_string(const std::string& s);

/// One reserving model evaluated at every date.
struct EvaluationModel {
    std::string name;
    ReservingMethod method = ReservingMethod::hrm;
    ModelSpec spec;                   // hrm only
    std::vector<std::string> select;  // candidates tried on the first date, per layer
    int folds = 5;
    std::size_t n_paths = 1000;
    std::uint64_t seed = 1;
    LayerFitter fitter = default_layer_fitter;

    static EvaluationModel from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
};

struct EvaluationConfig {
    std::vector<int> dates;  // calendar years; a date is the end of that year
    int horizon = 2;
    std::optional<double> cap;  // percentage error magnitude cap
    double interval_level = 0.95;
    int threads = 1;  // 0 = hardware concurrency
    std::vector<EvaluationModel> models;

    static EvaluationConfig from_json(const nlohmann::json& j);
    static EvaluationConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

struct EvaluationEntry {
    int date = 0;
    int cutoff = 0;  // window-relative year
    std::string model;
    double predicted = 0.0;
    double actual = 0.0;
    std::optional<double> pe;
    std::optional<double> lower, upper;
};

struct EvaluationRun {
    int horizon = 0;
    std::vector<EvaluationEntry> entries;  // date-major, models in config order
    std::vector<std::string> models;
    // Covariates used by each hrm model's layers after first-date selection.
    std::vector<std::pair<std::string, ModelSpec>> specs;

    std::string to_csv() const;
    nlohmann::json to_json() const;
};

struct EvaluationSummary {
    std::string model;
    double mean_pe = 0.0;
    double mean_abs_pe = 0.0;
    std::size_t n = 0;
    std::size_t excluded = 0;

    nlohmann::json to_json() const;
};

/// (predicted - actual) / actual * 100, magnitude capped at `cap`; empty when actual is 0.
std::optional<double> percentage_error(double predicted, double actual, std::optional<double> cap = std::nullopt);

/// Realised payments in the `horizon` calendar years after `cutoff` from claims reported up to `cutoff`.
double realized_total(const Portfolio& portfolio, int cutoff, int horizon);

EvaluationRun moving_window_eval(const Portfolio& portfolio, const EvaluationConfig& config);

std::vector<EvaluationSummary> summarize(const EvaluationRun& run);

nlohmann::json summary_json(const EvaluationRun& run);

}  // namespace hrm
