#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "hrm/layer_model.hpp"

namespace hrm {

struct SelectionStep {
    std::string covariate;
    double holdout_loglik = 0.0;  // summed over folds after adding the covariate
    double gain = 0.0;
};

struct SelectionResult {
    std::vector<std::string> selected;  // in order of inclusion
    std::vector<SelectionStep> steps;
    double baseline_loglik = 0.0;              // hold-out log-likelihood of the base terms
    std::map<std::string, double> importance;  // step gains scaled to sum to 100
};

/// Sum over folds of the hold-out weighted log-likelihood of a model fitted on
/// the remaining folds. `folds` holds labels 1..K.
double holdout_loglik(Family family, const FeatureLayout& layout, std::span<const FeatureRow> rows,
                      std::span<const double> responses, std::span<const double> weights, std::span<const int> folds,
                      std::span<const std::string> terms, const EngineConfig& config);

/// Greedy forward selection: repeatedly adds the candidate with the largest
/// hold-out weighted log-likelihood, stopping when no candidate strictly
/// improves it. Candidates whose fits fail in some fold are skipped for that step.
SelectionResult forward_select(Family family, const FeatureLayout& layout, std::span<const FeatureRow> rows,
                               std::span<const double> responses, std::span<const double> weights,
                               std::span<const int> folds, std::span<const std::string> base_terms,
                               std::span<const std::string> candidates, const EngineConfig& config, int threads = 1);

}  // namespace hrm
