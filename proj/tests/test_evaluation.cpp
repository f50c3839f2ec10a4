#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <mutex>
#include <sstream>

#include "hrm/error.hpp"
#include "hrm/evaluation.hpp"
#include "hrm/generator.hpp"

using namespace hrm;

namespace {

SchemaConfig window_schema(int start, int tau, int d) {
    SchemaConfig s;
    s.window = ObservationWindow{start, tau, d};
    return s;
}

// Every claim pays 100 in each development year and settles in year d.
std::string deterministic_csv(int tau, int d, int per_year) {
    std::ostringstream out;
    out << "claim_id,reporting_year,dev_year,close,payment,size\n";
    for (int i = 1; i <= tau; ++i) {
        for (int k = 0; k < per_year; ++k) {
            for (int j = 1; j <= d && i + j - 1 <= tau; ++j) {
                out << "C" << i << "_" << k << ',' << i << ',' << j << ',' << (j == d ? 1 : 0) << ",1,100\n";
            }
        }
    }
    return out.str();
}

LayerFitter constant_fitter(double p, double q, double mu, double theta) {
    return [=](const LayerSpec& spec, const FeatureLayout&, const LayerData&) -> LayerModelPtr {
        if (spec.response == "close") return std::make_shared<ConstantLayer>(Family::bernoulli, p);
        if (spec.response == "payment") return std::make_shared<ConstantLayer>(Family::bernoulli, q);
        return std::make_shared<ConstantLayer>(Family::gamma, mu, theta);
    };
}

EvaluationModel chain_ladder_model() {
    EvaluationModel m;
    m.name = "cl";
    m.method = ReservingMethod::chain_ladder;
    return m;
}

EvaluationModel oracle_model() {
    EvaluationModel m;
    m.name = "oracle";
    m.spec = ModelSpec::three_layer({});
    m.n_paths = 20;
    m.fitter = constant_fitter(0.0, 1.0, 100.0, 1e-12);
    return m;
}

}  // namespace

TEST_CASE("percentage error") {
    CHECK(*percentage_error(110, 100) == doctest::Approx(10.0));
    CHECK(*percentage_error(100, 100) == 0.0);
    CHECK(*percentage_error(500, 100, 100.0) == 100.0);
    CHECK(*percentage_error(-500, 100, 100.0) == -100.0);
    CHECK_FALSE(percentage_error(5, 0).has_value());
}

TEST_CASE("summaries") {
    EvaluationRun run;
    run.models = {"a", "b", "c"};
    run.entries = {{1, 1, "a", 0, 0, 10.0, {}, {}}, {2, 2, "a", 0, 0, -10.0, {}, {}},
                   {1, 1, "b", 0, 0, 7.32, {}, {}}, {2, 2, "b", 0, 0, std::nullopt, {}, {}},
                   {1, 1, "c", 0, 0, -3.0, {}, {}}, {2, 2, "c", 0, 0, 8.0, {}, {}}};
    auto s = summarize(run);
    CHECK(s[0].mean_pe == doctest::Approx(0.0));
    CHECK(s[0].mean_abs_pe == doctest::Approx(10.0));
    CHECK(s[1].mean_pe == doctest::Approx(7.32));
    CHECK(s[1].mean_abs_pe == doctest::Approx(7.32));
    CHECK(s[1].excluded == 1);
    CHECK(s[2].mean_abs_pe >= std::abs(s[2].mean_pe));
    run.entries[2].pe.reset();
    CHECK_THROWS_AS(summarize(run), StateError);
    CHECK_THROWS_AS(summarize(EvaluationRun{}), StateError);
}

TEST_CASE("realised totals are hand sums") {
    auto p = ingest_csv_text(
        "claim_id,reporting_year,dev_year,close,payment,size\n"
        "A,1,1,0,1,100\nA,1,2,0,1,50\nA,1,3,1,1,20\n"
        "B,1,1,1,1,10\n"
        "C,2,1,0,1,30\nC,2,2,1,1,40\n",
        window_schema(1, 3, 3));
    CHECK(realized_total(p, 1, 1) == 50.0);
    CHECK(realized_total(p, 2, 1) == 60.0);
    CHECK(realized_total(p, 1, 2) == 70.0);

    EvaluationConfig cfg;
    cfg.dates = {2};
    cfg.horizon = 1;
    auto m = oracle_model();
    m.fitter = constant_fitter(0.5, 0.5, 10.0, 0.5);
    cfg.models = {m};
    auto run = moving_window_eval(p, cfg);
    REQUIRE(run.entries.size() == 1);
    CHECK(run.entries[0].actual == 60.0);
    CHECK(run.entries[0].cutoff == 2);
}

TEST_CASE("a perfectly specified model has zero error") {
    auto p = ingest_csv_text(deterministic_csv(6, 3, 4), window_schema(1, 6, 3));
    EvaluationConfig cfg;
    cfg.dates = {3, 4};
    cfg.horizon = 2;
    cfg.models = {chain_ladder_model(), oracle_model()};
    auto run = moving_window_eval(p, cfg);
    REQUIRE(run.entries.size() == 4);
    for (const auto& e : run.entries) {
        REQUIRE(e.pe.has_value());
        CHECK(std::abs(*e.pe) < 1e-3);
    }
    CHECK(run.entries[0].actual == 100.0 * 4 * 3);
}

TEST_CASE("shifting the calendar reproduces the error series") {
    auto g = [] {
        GeneratorConfig c;
        c.seed = 11;
        c.tau = 6;
        c.d = 3;
        c.claims_per_year.assign(6, 200);
        c.p = {0.4, 0.5, 1.0};
        c.q = {0.7, 0.5, 0.5};
        c.mu = {100, 200, 300};
        c.theta = 0.3;
        return generate(c);
    }();
    auto a = ingest_csv_text(g.csv, window_schema(2011, 6, 3));
    auto b = ingest_csv_text(g.csv, window_schema(2012, 6, 3));
    EvaluationConfig ca;
    ca.horizon = 2;
    ca.models = {chain_ladder_model()};
    EvaluationModel h;
    h.name = "hrm";
    h.spec = ModelSpec::three_layer({});
    h.n_paths = 200;
    ca.models.push_back(h);
    auto cb = ca;
    ca.dates = {2013, 2014};
    cb.dates = {2014, 2015};
    auto ra = moving_window_eval(a, ca);
    auto rb = moving_window_eval(b, cb);
    REQUIRE(ra.entries.size() == rb.entries.size());
    for (std::size_t k = 0; k < ra.entries.size(); ++k) {
        CHECK(ra.entries[k].date + 1 == rb.entries[k].date);
        CHECK(ra.entries[k].predicted == rb.entries[k].predicted);
        CHECK(ra.entries[k].actual == rb.entries[k].actual);
        CHECK(ra.entries[k].pe == rb.entries[k].pe);
    }
    CHECK_THROWS_AS(moving_window_eval(a, cb), ConfigError);
    ca.dates = {2010};
    CHECK_THROWS_AS(moving_window_eval(a, ca), ConfigError);
}

TEST_CASE("post-cutoff records never reach the fitters") {
    GeneratorConfig c;
    c.seed = 3;
    c.tau = 6;
    c.d = 3;
    c.claims_per_year.assign(6, 150);
    c.p = {0.4, 0.5, 1.0};
    c.q = {0.7, 0.5, 0.5};
    c.mu = {100, 200, 300};
    c.theta = 0.3;
    auto p = generate(c).portfolio;
    const int cutoff = 3;
    const double sentinel = 9.99e9;
    for (auto& r : p.records) {
        if (p.claims[r.claim].reporting_year + r.dev_year - 1 > cutoff) r.size = sentinel;
    }
    std::mutex mutex;
    double max_seen = 0.0;
    EvaluationModel spy;
    spy.name = "spy";
    spy.spec = ModelSpec::three_layer({});
    spy.n_paths = 10;
    spy.fitter = [&](const LayerSpec& s, const FeatureLayout& layout, const LayerData& data) {
        std::lock_guard lock(mutex);
        for (std::size_t k = 0; k < data.rows.size(); ++k) {
            max_seen = std::max(max_seen, data.responses[k]);
            for (auto slot : {FeatureLayout::kSizeLastYear, FeatureLayout::kTotalAmountPaid}) {
                if (auto* v = std::get_if<double>(&data.rows[k][slot])) max_seen = std::max(max_seen, *v);
            }
        }
        return default_layer_fitter(s, layout, data);
    };
    EvaluationConfig cfg;
    cfg.dates = {cutoff};
    cfg.horizon = 2;
    cfg.models = {spy};
    auto run = moving_window_eval(p, cfg);
    CHECK(max_seen > 0.0);
    CHECK(max_seen < sentinel);
    CHECK(run.entries[0].actual >= sentinel);
}

TEST_CASE("evaluation is deterministic across thread counts") {
    GeneratorConfig c;
    c.seed = 21;
    c.tau = 6;
    c.d = 3;
    c.claims_per_year.assign(6, 150);
    c.covariates.push_back({"region", CovariateKind::categorical, {"n", "s"}, {0.5, 0.5}, 0, 1});
    c.size_effects.levels["region"]["s"] = 0.6;
    c.p = {0.4, 0.5, 1.0};
    c.q = {0.7, 0.5, 0.5};
    c.mu = {100, 200, 300};
    c.theta = 0.3;
    auto p = generate(c).portfolio;
    EvaluationModel h;
    h.name = "hrm";
    h.spec = ModelSpec::three_layer({});
    h.select = {"region"};
    h.n_paths = 100;
    EvaluationConfig cfg;
    cfg.dates = {3, 4};
    cfg.horizon = 2;
    cfg.cap = 100.0;
    cfg.models = {h, chain_ladder_model()};
    auto r1 = moving_window_eval(p, cfg);
    cfg.threads = 3;
    auto r2 = moving_window_eval(p, cfg);
    CHECK(r1.to_csv() == r2.to_csv());
    CHECK(r1.to_json() == r2.to_json());
    REQUIRE(r1.specs.size() == 1);
    const auto& size_layer = r1.specs[0].second.layers[2];
    CHECK(std::find(size_layer.covariates.begin(), size_layer.covariates.end(), "region") != size_layer.covariates.end());
    auto back = EvaluationConfig::from_json(cfg.to_json());
    CHECK(back.to_json() == cfg.to_json());
}
