#include "hrm/features.hpp"

#include "hrm/error.hpp"

namespace hrm {

FeatureLayout::FeatureLayout(const Portfolio& portfolio) {
    names_ = {"dev_year", "calendar_year", "reporting_year", "size_last_year",
              "total_amount_paid", "close", "payment", "size"};
    for (const auto& c : portfolio.covariates) names_.push_back(c.name);
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (!index_.emplace(names_[i], i).second) {
            throw SchemaError("covariate name '" + names_[i] + "' collides with a development covariate");
        }
    }
}

std::optional<std::size_t> FeatureLayout::find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t FeatureLayout::at(std::string_view name) const {
    auto idx = find(name);
    if (!idx) throw PredictionError("unknown covariate '" + std::string(name) + "'");
    return *idx;
}

std::optional<std::size_t> FeatureLayout::outcome_slot(std::string_view field) {
    if (field == "close") return kClose;
    if (field == "payment") return kPayment;
    if (field == "size") return kSize;
    return std::nullopt;
}

FeatureRow static_row(const Portfolio& portfolio, std::size_t claim, const FeatureLayout& layout) {
    FeatureRow row(layout.size());
    const auto& c = portfolio.claims[claim];
    for (std::size_t i = 0; i < c.static_covariates.size(); ++i) {
        row[FeatureLayout::kStaticOffset + i] = c.static_covariates[i];
    }
    row[FeatureLayout::kReportingYear] = std::to_string(c.reporting_year);
    return row;
}

void set_development(FeatureRow& row, int reporting_year, int dev_year, double size_last_year,
                     double total_amount_paid) {
    row[FeatureLayout::kDevYear] = std::to_string(dev_year);
    row[FeatureLayout::kCalendarYear] = std::to_string(reporting_year + dev_year - 1);
    row[FeatureLayout::kSizeLastYear] = size_last_year;
    row[FeatureLayout::kTotalAmountPaid] = total_amount_paid;
    row[FeatureLayout::kClose] = std::monostate{};
    row[FeatureLayout::kPayment] = std::monostate{};
    row[FeatureLayout::kSize] = std::monostate{};
}

FeatureRow record_row(const Portfolio& portfolio, const DevelopmentRecord& record, const FeatureLayout& layout) {
    auto row = static_row(portfolio, record.claim, layout);
    set_development(row, portfolio.claims[record.claim].reporting_year, record.dev_year, record.size_last_year,
                    record.total_amount_paid);
    row[FeatureLayout::kClose] = record.close ? 1.0 : 0.0;
    row[FeatureLayout::kPayment] = record.payment ? 1.0 : 0.0;
    row[FeatureLayout::kSize] = record.size;
    return row;
}

double outcome_value(const DevelopmentRecord& record, std::string_view field) {
    if (field == "close") return record.close ? 1.0 : 0.0;
    if (field == "payment") return record.payment ? 1.0 : 0.0;
    if (field == "size") return record.size;
    throw ConfigError("unknown layer response '" + std::string(field) + "'");
}

}  // namespace hrm
