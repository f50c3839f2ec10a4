#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace hrm {

/// A covariate value: missing, numeric, or a categorical level.
using Value = std::variant<std::monostate, double, std::string>;

inline bool is_missing(const Value& v) { return std::holds_alternative<std::monostate>(v); }

/// Level used for categorical covariates without a registered value.
inline const std::string kNotAvailable = "NA";

struct ObservationWindow {
    int start_year = 1;  // calendar year of reporting year 1
    int tau = 1;         // number of observed years
    int d = 1;           // maximum settlement delay in years

    /// Number of observed development years for a claim reported in `reporting_year`.
    int observed_years(int reporting_year) const;
};

enum class CovariateKind { categorical, numeric, date };

struct CovariateInfo {
    std::string name;
    CovariateKind kind = CovariateKind::categorical;
    bool derived = false;  // produced from another column (binning), never emitted
};

struct Claim {
    std::string claim_id;
    int reporting_year = 1;
    std::vector<Value> static_covariates;  // aligned with Portfolio::covariates
    int observed_years = 1;
    std::size_t first_record = 0;  // index into Portfolio::records
    std::size_t record_count = 0;
};

struct DevelopmentRecord {
    std::size_t claim = 0;  // index into Portfolio::claims
    int dev_year = 1;
    bool close = false;
    bool payment = false;
    double size = 0.0;
    // Derived fields.
    int calendar_year = 1;  // r_k + j - 1, relative to the window (1-based)
    double size_last_year = 0.0;
    double total_amount_paid = 0.0;
};

struct Portfolio {
    ObservationWindow window;
    std::vector<CovariateInfo> covariates;
    std::vector<Claim> claims;
    std::vector<DevelopmentRecord> records;
    std::vector<long> reported_counts;  // n_i, i = 1..tau

    std::span<const DevelopmentRecord> records_of(std::size_t claim) const {
        const auto& c = claims[claim];
        return {records.data() + c.first_record, c.record_count};
    }
    std::optional<std::size_t> covariate_index(const std::string& name) const;
    /// True when the claim's last observed record carries close = 1.
    bool settled(std::size_t claim) const;
};

/// Binning rule for a numeric covariate.
struct BinSpec {
    std::vector<double> breakpoints;  // strictly increasing
    std::vector<std::string> labels;  // breakpoints.size() + 1 labels, or empty for defaults
};

struct ColumnSpec {
    std::string name;
    CovariateKind kind = CovariateKind::categorical;
    std::optional<BinSpec> bins;
};

struct SchemaConfig {
    std::vector<ColumnSpec> columns;
    std::optional<ObservationWindow> window;  // inferred from the data when absent
    int first_modeled_year = 1;

    static SchemaConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    static SchemaConfig load(const std::string& path);
};

/// Maps each value to the label of its half-open interval [b_i, b_{i+1}).
/// Missing values map to `na_label`.
std::vector<std::string> bin_continuous(std::span<const Value> values, const BinSpec& bins,
                                        const std::string& na_label = kNotAvailable);
std::string bin_label(double value, const BinSpec& bins);

/// Fills calendar_year, size_last_year and total_amount_paid on every record.
Portfolio derive_development_covariates(Portfolio portfolio);

/// Checks every core-data invariant; throws ConsistencyError on violation.
void validate(const Portfolio& portfolio);

/// Recomputes n_i, per-claim record spans and observed years.
void reindex(Portfolio& portfolio);

Portfolio ingest_csv(const std::string& path, const SchemaConfig& schema);
Portfolio ingest_csv_text(const std::string& text, const SchemaConfig& schema);

/// Writes the portfolio in the long CSV format read by ingest_csv.
std::string emit_csv(const Portfolio& portfolio);
void write_csv(const Portfolio& portfolio, const std::string& path);

/// Appends a categorical `<name>_bin` covariate for every binned numeric column.
void apply_bins(Portfolio& portfolio, const SchemaConfig& schema);

/// Copies year-1 outcomes into static covariates `payment_year1` and
/// `size_year1` (used when modelling starts at development year 2).
void add_first_year_covariates(Portfolio& portfolio);

/// Restricts the portfolio to information known at the end of window year `cutoff`.
Portfolio truncate(const Portfolio& portfolio, int cutoff);

}  // namespace hrm
