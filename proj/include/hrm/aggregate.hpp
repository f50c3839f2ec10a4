#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hrm/core_data.hpp"
#include "hrm/families.hpp"

namespace hrm {

/// Runoff triangle: rows are reporting years 1..rows, columns development
/// years 1..cols. Cell (i, j), 0-based, is observed when i + j < observed_diagonal.
struct Triangle {
    std::string layer;
    std::vector<std::vector<std::optional<double>>> cells;
    std::vector<double> exposure;  // n_i; empty when unknown

    std::size_t rows() const { return cells.size(); }
    std::size_t cols() const { return cells.empty() ? 0 : cells[0].size(); }
    bool observed(std::size_t i, std::size_t j) const { return cells[i][j].has_value(); }
    double at(std::size_t i, std::size_t j) const;
    /// Number of observed columns in row i.
    std::size_t age(std::size_t i) const;

    /// Builds a triangle from a dense matrix, observing cells with i + j < rows (square layout).
    static Triangle from_rows(const std::vector<std::vector<double>>& values, std::vector<double> exposure = {});
    void validate() const;
};

Triangle build_triangle(const Portfolio& portfolio, const std::string& layer);

Triangle read_triangle_csv(const std::string& path);
Triangle parse_triangle_csv(const std::string& text);
std::string triangle_to_csv(const Triangle& t);

struct ChainLadderResult {
    std::vector<double> factors;                  // f_j for j = 2..cols (index j-2)
    std::vector<std::vector<double>> cumulative;  // completed
    std::vector<double> latest, ultimate, reserve;
    double total_reserve = 0.0;

    nlohmann::json to_json() const;
};

ChainLadderResult chain_ladder(const Triangle& incremental);

/// Chain-ladder reserve restricted to the next `horizon` development years of each row.
double chain_ladder_reserve(const ChainLadderResult& cl, const Triangle& incremental, std::optional<int> horizon);

struct MackResult {
    std::vector<double> sigma2;  // sigma_j^2 for factors f_j, j = 2..cols
    std::vector<double> row_se;
    double total_se = 0.0;
    double reserve = 0.0;
    double level = 0.95;
    double lower = 0.0, upper = 0.0;  // normal interval

    nlohmann::json to_json() const;
};

MackResult mack_se(const Triangle& incremental, double level = 0.95);

struct MultiplicativeFit {
    std::vector<double> alpha;  // row effects alpha~_i
    std::vector<double> beta;   // column effects, sum 1
    int iterations = 0;

    double fitted(std::size_t i, std::size_t j) const { return alpha[i] * beta[j]; }
    nlohmann::json to_json() const;
};

struct MultiplicativeOptions {
    bool allow_zero_margins = false;  // zero rows or columns get zero effects instead of an error
    double tolerance = 1e-14;
    int max_iterations = 100000;
};

/// Poisson maximum likelihood for E X_ij = alpha_i beta_j over the observed cells.
MultiplicativeFit fit_multiplicative(const Triangle& t, const MultiplicativeOptions& options = {});

/// Sum of fitted values over unobserved cells, optionally within `horizon` years of each row's age.
double multiplicative_reserve(const MultiplicativeFit& fit, const Triangle& t, std::optional<int> horizon = std::nullopt);

/// Poisson (quasi) log-likelihood of the observed cells.
double multiplicative_loglik(const MultiplicativeFit& fit, const Triangle& t);

struct DclResult {
    std::vector<double> pi;     // payment probability per dev year
    std::vector<double> mu;     // mean payment per dev year
    std::vector<double> gamma;  // reporting-year inflation, gamma_1 = 1
    MultiplicativeFit size_fit;
    double reserve = 0.0;

    nlohmann::json to_json() const;
};

DclResult dcl_rbns(const Triangle& counts, const Triangle& sizes, std::optional<int> horizon = std::nullopt);
DclResult dcl_rbns(const Portfolio& portfolio, std::optional<int> horizon = std::nullopt);

struct CrmResult {
    std::vector<double> lambda;  // payments per reported claim and dev year
    std::vector<double> alpha;   // size row effects
    std::vector<double> beta;    // size column effects, sum 1
    double reserve = 0.0;

    nlohmann::json to_json() const;
};

CrmResult crm_rbns(const Triangle& counts, const Triangle& sizes, std::optional<int> horizon = std::nullopt);
CrmResult crm_rbns(const Portfolio& portfolio, std::optional<int> horizon = std::nullopt);

struct LrtResult {
    double statistic = 0.0;
    double dof = 0.0;
    double p_value = 1.0;
    double loglik_full = 0.0;
    double loglik_reduced = 0.0;

    nlohmann::json to_json() const;
};

LrtResult lrt_bridge(double loglik_full, double loglik_reduced, double dof);

/// Sums statistics and degrees of freedom of independent per-layer tests.
LrtResult joint_lrt(const std::vector<LrtResult>& tests);

/// Tests the multiplicative (reporting year x development year) layer model
/// against the same model with extra covariates, by likelihood ratio on the
/// layer's observations.
struct BridgeLayer {
    std::string response;  // close, payment or size
    Family family = Family::bernoulli;
    std::string filter;
    std::vector<std::string> extra_covariates;
};

LrtResult bridge_test(const Portfolio& portfolio, const BridgeLayer& layer);

/// Single-layer quasi-Poisson model of yearly payment totals per claim with
/// reporting-year and development-year factors, fitted on every claim-year up
/// to the observation boundary (settled claims contribute zeros). Returns the
/// expected reserve over unobserved claim-years.
double bridge_reserve(const Portfolio& portfolio, std::optional<int> horizon = std::nullopt);

}  // namespace hrm
