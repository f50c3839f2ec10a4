#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "hrm/error.hpp"
#include "hrm/selection.hpp"
#include "hrm/weighting.hpp"

using namespace hrm;

namespace {

struct Data {
    FeatureLayout layout;
    std::vector<FeatureRow> rows;
    std::vector<double> y, w;
    std::vector<int> folds;
};

// Bernoulli responses; "a" carries signal of size `effect`, "b" and "c" are noise.
Data make(std::uint64_t seed, int n, double effect) {
    Portfolio p;
    p.covariates = {{"a", CovariateKind::categorical, false},
                    {"b", CovariateKind::numeric, false},
                    {"c", CovariateKind::categorical, false}};
    Data d{FeatureLayout(p), {}, {}, {}, {}};
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0, 1);
    for (int i = 0; i < n; ++i) {
        FeatureRow r(d.layout.size());
        bool a = u(rng) < 0.5;
        r[d.layout.at("a")] = std::string(a ? "yes" : "no");
        r[d.layout.at("b")] = u(rng);
        r[d.layout.at("c")] = std::string(1, static_cast<char>('x' + static_cast<int>(3 * u(rng))));
        double prob = 1.0 / (1.0 + std::exp(-(-0.3 + (a ? effect : 0.0))));
        d.y.push_back(u(rng) < prob ? 1.0 : 0.0);
        d.w.push_back(1.0);
        d.rows.push_back(std::move(r));
    }
    d.folds = assign_folds(d.rows.size(), 5, seed + 1000);
    return d;
}

}  // namespace

TEST_CASE("a single informative candidate gets all the importance") {
    auto d = make(1, 800, 1.2);
    std::vector<std::string> base, cand{"a"};
    auto r = forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, cand, {});
    REQUIRE(r.selected == std::vector<std::string>{"a"});
    CHECK(r.importance.at("a") == doctest::Approx(100.0));
    CHECK(r.steps[0].gain > 0.0);
}

TEST_CASE("the informative covariate is picked first in most seeds") {
    int first_a = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto d = make(seed, 500, 0.8);
        std::vector<std::string> base, cand{"b", "a"};
        auto r = forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, cand, {}, 2);
        if (!r.selected.empty() && r.selected[0] == "a") ++first_a;
        double total = 0;
        for (const auto& [k, v] : r.importance) total += v;
        if (!r.selected.empty()) CHECK(total == doctest::Approx(100.0).epsilon(1e-12));
    }
    CHECK(first_a > 10);
}

TEST_CASE("pure noise candidates are mostly rejected") {
    int empty = 0;
    for (std::uint64_t seed = 1; seed <= 20; ++seed) {
        auto d = make(seed, 500, 0.0);
        std::vector<std::string> base, cand{"b", "c"};
        auto r = forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, cand, {});
        if (r.selected.empty()) ++empty;
        CHECK(r.importance.size() == r.selected.size());
    }
    CHECK(empty > 10);
}

TEST_CASE("selection is deterministic and rejects empty candidate lists") {
    auto d = make(4, 400, 0.8);
    std::vector<std::string> base, cand{"a", "b", "c"};
    auto r1 = forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, cand, {});
    auto r2 = forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, cand, {}, 3);
    CHECK(r1.selected == r2.selected);
    CHECK(r1.baseline_loglik == r2.baseline_loglik);
    std::vector<std::string> none;
    CHECK_THROWS_AS(forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, none, {}), ConfigError);
}

TEST_CASE("gbm engine works inside selection") {
    auto d = make(6, 600, 1.2);
    EngineConfig cfg;
    cfg.kind = EngineKind::gbm;
    cfg.gbm.n_trees = 30;
    cfg.gbm.shrinkage = 0.1;
    std::vector<std::string> base, cand{"a", "b"};
    auto r = forward_select(Family::bernoulli, d.layout, d.rows, d.y, d.w, d.folds, base, cand, cfg);
    REQUIRE_FALSE(r.selected.empty());
    CHECK(r.selected[0] == "a");
}
