#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hrm/features.hpp"

namespace hrm {

/// Expands model terms into treatment-coded design columns.
///
/// A term is a feature name, an interaction `a:b`, or `a*b` (shorthand for
/// `a + b + a:b`). Categorical features contribute one dummy per non-reference
/// level; the reference is the first level in sorted order. Numeric features
/// enter linearly. Categorical levels not seen at build time encode as the
/// reference level and log a warning.
class DesignEncoder {
public:
    DesignEncoder() = default;

    static DesignEncoder build(const FeatureLayout& layout, std::span<const std::string> terms,
                               std::span<const FeatureRow> rows);

    std::size_t n_columns() const { return columns_.size(); }
    const std::vector<std::string>& column_names() const { return column_names_; }
    /// Feature names the encoder reads.
    std::vector<std::string> features() const;
    const std::vector<std::string>& terms() const { return terms_; }

    void encode(const FeatureRow& row, std::span<double> out) const;
    Eigen::MatrixXd encode_all(std::span<const FeatureRow> rows) const;

    /// Re-resolves feature slots against another layout (after deserialization).
    void bind(const FeatureLayout& layout);

    nlohmann::json to_json() const;
    static DesignEncoder from_json(const nlohmann::json& j, const FeatureLayout& layout);

private:
    struct Factor {
        std::string name;
        std::size_t slot = 0;
        bool categorical = false;
        std::vector<std::string> levels;  // sorted; levels[0] is the reference
        std::unordered_map<std::string, int> level_index;
    };
    struct Component {
        int factor = 0;
        int level = -1;  // -1 for a numeric factor
    };
    using Column = std::vector<Component>;  // empty column = intercept

    void index_levels();

    std::vector<std::string> terms_;
    std::vector<Factor> factors_;
    std::vector<Column> columns_;
    std::vector<std::string> column_names_;
};

/// Splits `a*b` into `a`, `b`, `a:b`; leaves other terms untouched.
std::vector<std::string> expand_terms(std::span<const std::string> terms);

}  // namespace hrm
