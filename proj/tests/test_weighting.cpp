#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hrm/error.hpp"
#include "hrm/layer_model.hpp"
#include "hrm/weighting.hpp"

using namespace hrm;

TEST_CASE("weights on three equal cohorts") {
    std::vector<double> n{10, 10, 10};
    auto w = development_year_weights(n, 3);
    CHECK(w.at(1) == 1.0);
    CHECK(w.at(2) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(w.at(3) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("two equal cohorts give weight one") {
    std::vector<double> n{7, 7};
    CHECK(development_year_weights(n, 2).at(2) == 1.0);
}

TEST_CASE("zero training exposure is reported with the year") {
    std::vector<double> n{0, 10};
    try {
        development_year_weights(n, 2);
        FAIL("expected an error");
    } catch (const DegenerateError& e) {
        CHECK(std::string(e.what()).find("year 2") != std::string::npos);
    }
}

TEST_CASE("first modeled year 2 starts the vector at 2") {
    std::vector<double> n{1, 2, 3, 4};
    auto w = development_year_weights(n, 4, 2);
    CHECK(w.count(1) == 0);
    CHECK(w.at(2) == doctest::Approx(4.0 / 6.0));
}

TEST_CASE("weights are increasing from year 2 on with positive counts") {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> cnt(1, 500), dd(3, 12);
    for (int trial = 0; trial < 50; ++trial) {
        int d = dd(rng);
        std::vector<double> n;
        for (int i = 0; i < d; ++i) n.push_back(cnt(rng));
        auto w = development_year_weights(n, d);
        for (int j = 3; j <= d; ++j) CHECK(w.at(j) > w.at(j - 1));
    }
}

TEST_CASE("folds form a balanced deterministic partition") {
    auto a = assign_folds(100, 5, 9);
    auto b = assign_folds(100, 5, 9);
    CHECK(a == b);
    for (int k = 1; k <= 5; ++k) CHECK(std::count(a.begin(), a.end(), k) == 20);

    auto c = assign_folds(7, 5, 1);
    std::vector<long> sizes;
    for (int k = 1; k <= 5; ++k) sizes.push_back(std::count(c.begin(), c.end(), k));
    std::sort(sizes.begin(), sizes.end());
    CHECK(sizes == std::vector<long>{1, 1, 1, 2, 2});

    CHECK(assign_folds(100, 5, 10) != a);
    CHECK_THROWS_AS(assign_folds(4, 5, 1), ConfigError);
    CHECK_THROWS_AS(assign_folds(10, 1, 1), ConfigError);
}

TEST_CASE("stratified folds balance within each stratum") {
    std::vector<int> strata;
    for (int i = 0; i < 103; ++i) strata.push_back(i % 3);
    auto f = assign_folds(strata.size(), 5, 4, strata);
    for (int s = 0; s < 3; ++s) {
        std::vector<long> counts(5, 0);
        for (std::size_t i = 0; i < f.size(); ++i) {
            if (strata[i] == s) ++counts[static_cast<std::size_t>(f[i] - 1)];
        }
        CHECK(*std::max_element(counts.begin(), counts.end()) - *std::min_element(counts.begin(), counts.end()) <= 1);
    }
    std::vector<long> total(5, 0);
    for (int x : f) ++total[static_cast<std::size_t>(x - 1)];
    CHECK(*std::max_element(total.begin(), total.end()) - *std::min_element(total.begin(), total.end()) <= 1);
}

TEST_CASE("weighted log-likelihood of single observations") {
    Portfolio p;
    FeatureLayout layout(p);
    std::vector<FeatureRow> rows(2, FeatureRow(layout.size()));
    ConstantLayer half(Family::bernoulli, 0.5);
    std::vector<double> y1{1}, w2{2};
    CHECK(weighted_loglik(half, std::span(rows).first(1), y1, w2) == doctest::Approx(2 * std::log(0.5)));

    // Gamma, weights (1, 3) against a direct density.
    ConstantLayer g(Family::gamma, 4.0, 0.5);
    std::vector<double> y{2.0, 7.0}, w{1.0, 3.0};
    auto direct = [](double y, double mu, double theta) {
        double k = 1 / theta;
        return k * std::log(k / mu) - std::lgamma(k) + (k - 1) * std::log(y) - k * y / mu;
    };
    CHECK(weighted_loglik(g, rows, y, w) == doctest::Approx(direct(2, 4, 0.5) + 3 * direct(7, 4, 0.5)).epsilon(1e-13));
    std::vector<double> w_double{2.0, 6.0};
    CHECK(weighted_loglik(g, rows, y, w_double) == doctest::Approx(2 * weighted_loglik(g, rows, y, w)).epsilon(1e-14));

    ConstantLayer bad(Family::gamma, -1.0, 0.5);
    CHECK_THROWS_AS(weighted_loglik(bad, rows, y, w), DomainError);
}
