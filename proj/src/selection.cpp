#include "hrm/selection.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <thread>

#include "hrm/error.hpp"
#include "hrm/log.hpp"

namespace hrm {

double holdout_loglik(Family family, const FeatureLayout& layout, std::span<const FeatureRow> rows,
                      std::span<const double> responses, std::span<const double> weights, std::span<const int> folds,
                      std::span<const std::string> terms, const EngineConfig& config) {
    if (folds.size() != rows.size()) throw InputError("fold labels do not match the rows");
    int K = folds.empty() ? 0 : *std::max_element(folds.begin(), folds.end());
    double total = 0.0;
    for (int k = 1; k <= K; ++k) {
        std::vector<FeatureRow> train_rows, test_rows;
        std::vector<double> train_y, train_w, test_y, test_w;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (folds[i] == k) {
                test_rows.push_back(rows[i]);
                test_y.push_back(responses[i]);
                test_w.push_back(weights[i]);
            } else {
                train_rows.push_back(rows[i]);
                train_y.push_back(responses[i]);
                train_w.push_back(weights[i]);
            }
        }
        if (test_rows.empty()) continue;
        auto model = fit_layer(family, layout, train_rows, terms, train_y, train_w, config);
        total += weighted_loglik(*model, test_rows, test_y, test_w);
    }
    return total;
}

SelectionResult forward_select(Family family, const FeatureLayout& layout, std::span<const FeatureRow> rows,
                               std::span<const double> responses, std::span<const double> weights,
                               std::span<const int> folds, std::span<const std::string> base_terms,
                               std::span<const std::string> candidates, const EngineConfig& config, int threads) {
    if (candidates.empty()) throw ConfigError("forward selection needs at least one candidate");
    SelectionResult result;
    std::vector<std::string> terms(base_terms.begin(), base_terms.end());
    result.baseline_loglik = holdout_loglik(family, layout, rows, responses, weights, folds, terms, config);
    double current = result.baseline_loglik;
    std::vector<std::string> remaining(candidates.begin(), candidates.end());
    const double minus_inf = -std::numeric_limits<double>::infinity();

    while (!remaining.empty()) {
        std::vector<double> score(remaining.size(), minus_inf);
        auto evaluate = [&](std::size_t c) {
            auto trial = terms;
            trial.push_back(remaining[c]);
            try {
                score[c] = holdout_loglik(family, layout, rows, responses, weights, folds, trial, config);
            } catch (const Error& e) {
                warn_once("candidate '" + remaining[c] + "' skipped: " + e.what());
            }
        };
        int n_threads = std::clamp(threads, 1, static_cast<int>(remaining.size()));
        if (n_threads == 1) {
            for (std::size_t c = 0; c < remaining.size(); ++c) evaluate(c);
        } else {
            std::atomic<std::size_t> next{0};
            std::vector<std::thread> pool;
            for (int t = 0; t < n_threads; ++t) {
                pool.emplace_back([&] {
                    for (std::size_t c; (c = next.fetch_add(1)) < remaining.size();) evaluate(c);
                });
            }
            for (auto& th : pool) th.join();
        }
        // First maximum wins, so ties go to the earlier candidate.
        std::size_t best = 0;
        for (std::size_t c = 1; c < score.size(); ++c) {
            if (score[c] > score[best]) best = c;
        }
        if (!(score[best] > current)) break;
        result.steps.push_back({remaining[best], score[best], score[best] - current});
        result.selected.push_back(remaining[best]);
        terms.push_back(remaining[best]);
        current = score[best];
        remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
    }

    double total_gain = 0.0;
    for (const auto& s : result.steps) total_gain += s.gain;
    for (const auto& s : result.steps) result.importance[s.covariate] = 100.0 * s.gain / total_gain;
    return result;
}

}  // namespace hrm
