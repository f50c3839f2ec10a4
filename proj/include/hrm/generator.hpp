#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/core_data.hpp"

namespace hrm {

struct GeneratedCovariate {
    std::string name;
    CovariateKind kind = CovariateKind::categorical;
    std::vector<std::string> levels;  // categorical
    std::vector<double> probs;        // categorical, sums to 1
    double min = 0.0, max = 1.0;      // numeric, uniform
};

/// Additive link-scale effects: per categorical level, or a slope for numerics.
struct Effects {
    std::map<std::string, std::map<std::string, double>> levels;
    std::map<std::string, double> slopes;
};

/// Extra claims in one reporting year that settle in their first year with a payment.
struct Shock {
    int reporting_year = 1;
    long extra_claims = 0;
    double mu = 0.0;  // mean payment; 0 means mu_1
};

struct GeneratorConfig {
    std::uint64_t seed = 1;
    int tau = 5;
    int d = 5;
    std::vector<long> claims_per_year;  // n_1 .. n_tau
    std::vector<GeneratedCovariate> covariates;
    std::vector<double> p;    // settlement probability per dev year (p_d is ignored: settlement is forced)
    std::vector<double> q;    // payment probability per dev year
    double close_effect = 0.0;  // logit shift of q when the claim settles that year
    std::vector<double> mu;   // mean payment per dev year
    double theta = 0.5;
    std::vector<double> gamma;  // reporting-year factor on payment size (empty = 1)
    Effects close_effects, payment_effects, size_effects;
    bool multiplicative = false;  // ignore covariate effects
    std::optional<Shock> shock;

    void validate() const;
    static GeneratorConfig from_json(const nlohmann::json& j);
    static GeneratorConfig load(const std::string& path);
    nlohmann::json to_json() const;
};

struct GeneratedData {
    std::string csv;
    SchemaConfig schema;
    Portfolio portfolio;
};

GeneratedData generate(const GeneratorConfig& config);

/// Closed-form cell expectations of the multiplicative mode (no covariate
/// effects, no shock), by reporting year i and dev year j, 0-based.
struct MultiplicativeTruth {
    std::vector<double> open_probability;  // S_j: claim open at the start of dev year j
    std::vector<double> pay_probability;   // pi_j = E[payment in j] per reported claim
    std::vector<double> mean_size;         // mu_j adjusted for the close effect
    std::vector<double> beta;              // normalised size column effects
    std::vector<double> alpha_tilde;       // row effects of the size triangle
    std::vector<std::vector<double>> expected_size;
    std::vector<std::vector<double>> expected_count;
    double rbns = 0.0;  // expected size over cells i + j > tau + 1 with j <= d
};

MultiplicativeTruth multiplicative_truth(const GeneratorConfig& config);

}  // namespace hrm
