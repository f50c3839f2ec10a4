#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/families.hpp"
#include "hrm/features.hpp"

namespace hrm {

struct GbmHyperparameters {
    int n_trees = 300;
    int max_depth = 2;
    double shrinkage = 0.05;
    double bag_fraction = 0.75;
    double min_node_weight = 10.0;  // in units of weights normalised to mean 1

    void validate() const;
};

struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;          // numeric: x < threshold (or missing) goes left
    std::vector<char> left_levels;   // categorical: level codes sent left
    int left = -1;
    int right = -1;
    double value = 0.0;  // leaf value on the link scale, before shrinkage
    double gain = 0.0;   // squared-error improvement of the split
};

struct RegressionTree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct GbmFeature {
    std::string name;
    bool categorical = false;
    std::vector<std::string> levels;
};

/// A fitted boosting ensemble. Link-scale prediction is
/// initial_value + shrinkage * sum_t tree_t(x).
struct GbmFit {
    Family loss = Family::gamma;
    double initial_value = 0.0;
    GbmHyperparameters hyperparameters;
    std::vector<GbmFeature> features;
    std::vector<RegressionTree> trees;
    std::vector<double> train_deviance;  // [0] = baseline, [t] = after tree t

    nlohmann::json to_json() const;
    static GbmFit from_json(const nlohmann::json& j);
};

/// Encoded view of one observation: numeric value or level code per feature
/// (NaN / -1 when missing or unseen).
struct GbmInput {
    std::vector<double> numeric;
    std::vector<int> level;
};

/// Resolves FeatureRows into GbmInputs for one fit.
class GbmEncoder {
public:
    GbmEncoder() = default;
    GbmEncoder(const GbmFit& fit, const FeatureLayout& layout);
    void encode(const FeatureRow& row, GbmInput& out) const;

private:
    std::vector<std::size_t> slots_;
    std::vector<bool> categorical_;
    std::vector<std::string> names_;
    std::vector<std::unordered_map<std::string, int>> level_index_;
};

GbmFit fit_gbm(const FeatureLayout& layout, std::span<const FeatureRow> rows, std::span<const std::string> features,
               std::span<const double> responses, Family loss, std::span<const double> weights,
               const GbmHyperparameters& hyperparameters, std::uint64_t seed);

double gbm_predict_link(const GbmFit& fit, const GbmInput& input);
double gbm_predict(const GbmFit& fit, const GbmInput& input);

/// Total split improvement per feature, scaled to sum to 100.
std::map<std::string, double> gbm_importance(const GbmFit& fit);

}  // namespace hrm
