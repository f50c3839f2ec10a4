#include "hrm/weighting.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "hrm/error.hpp"

namespace hrm {

WeightVector development_year_weights(std::span<const double> n, int d, int first_year) {
    if (d < 1) throw ConfigError("d must be at least 1");
    if (n.size() != static_cast<std::size_t>(d)) {
        throw ConfigError("expected " + std::to_string(d) + " reported counts, got " + std::to_string(n.size()));
    }
    for (double x : n) {
        if (!(x >= 0.0) || !std::isfinite(x)) throw DomainError("reported counts must be finite and nonnegative");
    }
    if (first_year < 1 || first_year > d) throw ConfigError("first modeled year must lie in 1..d");
    auto sum = [&](int from, int to) {  // 1-based inclusive
        double s = 0.0;
        for (int i = from; i <= to; ++i) s += n[static_cast<std::size_t>(i - 1)];
        return s;
    };
    WeightVector w;
    for (int j = first_year; j <= d; ++j) {
        if (j == 1) {
            w[j] = 1.0;
            continue;
        }
        double den = sum(1, d - j + 1);
        if (!(den > 0.0)) {
            throw DegenerateError("zero exposure in the training set for development year " + std::to_string(j));
        }
        w[j] = sum(d - j + 2, d) / den;
    }
    return w;
}

std::vector<int> assign_folds(std::size_t n, int K, std::uint64_t seed, std::span<const int> strata) {
    if (K < 2) throw ConfigError("number of folds must be at least 2");
    if (static_cast<std::size_t>(K) > n) {
        throw ConfigError("number of folds (" + std::to_string(K) + ") exceeds number of observations (" +
                          std::to_string(n) + ")");
    }
    if (!strata.empty() && strata.size() != n) throw InputError("strata length differs from observation count");
    std::mt19937_64 rng(seed);
    std::vector<int> labels(n);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    if (strata.empty()) {
        for (std::size_t k = 0; k < n; ++k) labels[order[k]] = static_cast<int>(k % static_cast<std::size_t>(K)) + 1;
        return labels;
    }
    // Stable by stratum after the shuffle, then deal labels round-robin: each
    // stratum is balanced and the running counter keeps global balance.
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return strata[a] < strata[b]; });
    for (std::size_t k = 0; k < n; ++k) labels[order[k]] = static_cast<int>(k % static_cast<std::size_t>(K)) + 1;
    return labels;
}

double weight_for(const WeightVector& w, int dev_year) {
    auto it = w.find(dev_year);
    if (it == w.end()) throw DomainError("no weight for development year " + std::to_string(dev_year));
    return it->second;
}

}  // namespace hrm
