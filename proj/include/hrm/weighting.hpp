#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <vector>

namespace hrm {

/// Development-year weights w_j, j = first_year .. d.
using WeightVector = std::map<int, double>;

/// w_j = sum_{i=d-j+2}^{d} n_i / sum_{i=1}^{d-j+1} n_i; w_1 = 1.
/// `reported_counts` holds n_1 .. n_d.
WeightVector development_year_weights(std::span<const double> reported_counts, int d, int first_year = 1);

/// Uniform random partition of `n` observations into K folds labelled 1..K,
/// sizes differing by at most one. With `strata`, each stratum is balanced
/// separately (labels rotate across strata so overall sizes stay balanced).
std::vector<int> assign_folds(std::size_t n, int K, std::uint64_t seed, std::span<const int> strata = {});

/// Weight of dev year j; throws DomainError when j is not covered.
double weight_for(const WeightVector& w, int dev_year);

}  // namespace hrm
