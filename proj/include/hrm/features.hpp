#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "hrm/core_data.hpp"

namespace hrm {

/// Positional view of the covariates a layer engine can see for one
/// (claim, development year) observation.
using FeatureRow = std::vector<Value>;

/// Names the slots of a FeatureRow. The first slots hold development
/// covariates and current-year layer outcomes; static claim covariates follow.
class FeatureLayout {
public:
    static constexpr std::size_t kDevYear = 0;
    static constexpr std::size_t kCalendarYear = 1;
    static constexpr std::size_t kReportingYear = 2;
    static constexpr std::size_t kSizeLastYear = 3;
    static constexpr std::size_t kTotalAmountPaid = 4;
    static constexpr std::size_t kClose = 5;
    static constexpr std::size_t kPayment = 6;
    static constexpr std::size_t kSize = 7;
    static constexpr std::size_t kStaticOffset = 8;

    FeatureLayout() = default;
    explicit FeatureLayout(const Portfolio& portfolio);

    std::size_t size() const { return names_.size(); }
    const std::vector<std::string>& names() const { return names_; }
    std::optional<std::size_t> find(std::string_view name) const;
    /// Throws PredictionError naming the feature when it is unknown.
    std::size_t at(std::string_view name) const;

    /// Slot of a layer outcome field ("close", "payment" or "size").
    static std::optional<std::size_t> outcome_slot(std::string_view field);

private:
    std::vector<std::string> names_;
    std::unordered_map<std::string, std::size_t> index_;
};

/// Layer outcome fields in record order.
inline const std::vector<std::string> kOutcomeFields = {"close", "payment", "size"};

/// Builds the static part of a row for a claim: development slots unset.
FeatureRow static_row(const Portfolio& portfolio, std::size_t claim, const FeatureLayout& layout);

/// Sets the development slots for development year `dev_year`.
void set_development(FeatureRow& row, int reporting_year, int dev_year, double size_last_year,
                     double total_amount_paid);

/// Full row for an observed record with every current-year outcome visible.
FeatureRow record_row(const Portfolio& portfolio, const DevelopmentRecord& record, const FeatureLayout& layout);

/// Numeric value of a layer outcome field on a record.
double outcome_value(const DevelopmentRecord& record, std::string_view field);

}  // namespace hrm
