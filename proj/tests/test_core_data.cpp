#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "csv.hpp"
#include "hrm/core_data.hpp"
#include "hrm/error.hpp"

using namespace hrm;

namespace {

SchemaConfig schema_with(std::vector<ColumnSpec> cols) {
    SchemaConfig s;
    s.columns = std::move(cols);
    return s;
}

const char* kTwoClaims =
    "claim_id,reporting_year,dev_year,close,payment,size,coverage\n"
    "A,1,1,0,1,100,theft\n"
    "A,1,2,1,1,50,theft\n"
    "B,1,1,0,0,0,building\n"
    "B,1,2,0,1,20,building\n";

}  // namespace

TEST_CASE("ingest: two claims with two development years") {
    auto schema = schema_with({{"coverage", CovariateKind::categorical, std::nullopt}});
    auto p = ingest_csv_text(kTwoClaims, schema);
    CHECK(p.claims.size() == 2);
    CHECK(p.records.size() == 4);
    CHECK(p.window.tau == 2);
    CHECK(p.window.d == 2);
    REQUIRE(p.reported_counts.size() == 2);
    CHECK(p.reported_counts[0] == 2);
    CHECK(p.reported_counts[1] == 0);
    CHECK(p.claims[0].claim_id == "A");
    CHECK(std::get<std::string>(p.claims[1].static_covariates[0]) == "building");
    CHECK(p.settled(0));
    CHECK_FALSE(p.settled(1));
}

TEST_CASE("ingest: header only gives an empty portfolio") {
    auto p = ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size\n", {});
    CHECK(p.claims.empty());
    CHECK(p.records.empty());
}

TEST_CASE("ingest: error paths") {
    auto schema = schema_with({{"coverage", CovariateKind::categorical, std::nullopt}});
    SUBCASE("missing column is named") {
        try {
            ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size\nA,1,1,1,0,0\n", schema);
            FAIL("expected SchemaError");
        } catch (const SchemaError& e) {
            CHECK(std::string(e.what()).find("coverage") != std::string::npos);
        }
    }
    SUBCASE("size > 0 with payment = 0 reports the line") {
        try {
            ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size\nA,1,1,0,0,0\nA,1,2,1,0,50\n", {});
            FAIL("expected ConsistencyError");
        } catch (const ConsistencyError& e) {
            CHECK(std::string(e.what()).find("line 3") != std::string::npos);
        }
    }
    SUBCASE("duplicate record") {
        CHECK_THROWS_AS(
            ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size\nA,1,1,0,0,0\nA,1,1,1,0,0\n", {}),
            DuplicateRecordError);
    }
    SUBCASE("reopening after settlement") {
        CHECK_THROWS_AS(
            ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size\nA,1,1,1,0,0\nA,1,2,0,0,0\n", {}),
            ConsistencyError);
    }
    SUBCASE("records beyond the observed window") {
        SchemaConfig s;
        s.window = ObservationWindow{1, 2, 2};
        CHECK_THROWS_AS(
            ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size\nA,2,1,0,0,0\nA,2,2,1,0,0\n", s),
            ConsistencyError);
    }
    SUBCASE("static covariate changes within a claim") {
        CHECK_THROWS_AS(ingest_csv_text("claim_id,reporting_year,dev_year,close,payment,size,coverage\n"
                                        "A,1,1,0,0,0,theft\nA,1,2,1,0,0,fire\n",
                                        schema),
                        ConsistencyError);
    }
}

TEST_CASE("bin_continuous: rep.delay bins with half-open intervals") {
    BinSpec bins{{5, 21}, {"5−", "[5,21]", "21+"}};
    std::vector<Value> values{3.0, 10.0, 30.0, std::monostate{}, 5.0, 21.0};
    auto labels = bin_continuous(values, bins);
    CHECK(labels[0] == "5−");
    CHECK(labels[1] == "[5,21]");
    CHECK(labels[2] == "21+");
    CHECK(labels[3] == "NA");
    // Values on a breakpoint fall in the interval to the right.
    CHECK(labels[4] == "[5,21]");
    CHECK(labels[5] == "21+");
    CHECK_THROWS_AS(bin_continuous(values, BinSpec{{5, 5}, {}}), ConfigError);
    CHECK_THROWS_AS(bin_continuous(values, BinSpec{{21, 5}, {}}), ConfigError);
}

TEST_CASE("bin_continuous: default labels") {
    BinSpec bins{{5, 21}, {}};
    std::vector<Value> values{1.0, 7.0, 99.0};
    auto labels = bin_continuous(values, bins);
    CHECK(labels == std::vector<std::string>{"5-", "[5,21)", "21+"});
}

TEST_CASE("derive_development_covariates") {
    Portfolio p;
    p.window = {1, 3, 3};
    p.claims.push_back({"A", 1, {}, 3, 0, 0});
    p.records = {{0, 1, false, true, 10.0}, {0, 2, false, false, 0.0}, {0, 3, true, true, 5.0}};
    reindex(p);
    p = derive_development_covariates(p);
    CHECK(p.records[0].size_last_year == 0.0);
    CHECK(p.records[0].total_amount_paid == 0.0);
    CHECK(p.records[2].size_last_year == 0.0);
    CHECK(p.records[2].total_amount_paid == 10.0);
    CHECK(p.records[2].calendar_year == 3);

    Portfolio q;
    q.window = {1, 2, 2};
    q.claims.push_back({"B", 1, {}, 2, 0, 0});
    q.records = {{0, 1, false, true, 100.0}, {0, 2, true, true, 50.0}};
    reindex(q);
    q = derive_development_covariates(q);
    CHECK(q.records[1].size_last_year == 100.0);
    CHECK(q.records[1].total_amount_paid == 100.0);
}

TEST_CASE("binning is applied at ingestion and survives emission") {
    SchemaConfig schema;
    schema.columns = {{"rep_delay", CovariateKind::numeric, BinSpec{{5, 21}, {"5-", "[5,21]", "21+"}}},
                      {"rep_date", CovariateKind::date, std::nullopt}};
    auto p = ingest_csv_text(
        "claim_id,reporting_year,dev_year,close,payment,size,rep_delay,rep_date\n"
        "A,1,1,1,1,12.5,10,2015-03-02\n"
        "B,1,1,1,0,0,NA,2015-07-30\n",
        schema);
    auto idx = p.covariate_index("rep_delay_bin");
    REQUIRE(idx);
    CHECK(std::get<std::string>(p.claims[0].static_covariates[*idx]) == "[5,21]");
    CHECK(std::get<std::string>(p.claims[1].static_covariates[*idx]) == "NA");
    auto text = emit_csv(p);
    CHECK(text.find("rep_delay_bin") == std::string::npos);
    CHECK(text.find("2015-07-30") != std::string::npos);
}

TEST_CASE("property: emit/ingest round trip is bit-exact") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> size(0.01, 1e6);
    std::bernoulli_distribution coin(0.4);
    SchemaConfig schema;
    schema.columns = {{"value", CovariateKind::numeric, std::nullopt},
                      {"cause", CovariateKind::categorical, std::nullopt}};
    schema.window = ObservationWindow{2011, 5, 5};
    for (int trial = 0; trial < 20; ++trial) {
        Portfolio p;
        p.window = *schema.window;
        p.covariates = {{"value", CovariateKind::numeric, false}, {"cause", CovariateKind::categorical, false}};
        for (int k = 0; k < 30; ++k) {
            Claim c;
            char id[16];
            std::snprintf(id, sizeof id, "C%04d", k);
            c.claim_id = id;
            c.reporting_year = 1 + static_cast<int>(rng() % 5);
            c.static_covariates = {coin(rng) ? Value{std::monostate{}} : Value{size(rng) / 7.0},
                                   coin(rng) ? Value{std::string("NA")} : Value{std::string("water, damage")}};
            std::size_t idx = p.claims.size();
            p.claims.push_back(c);
            int tk = p.window.observed_years(c.reporting_year);
            for (int j = 1; j <= tk; ++j) {
                DevelopmentRecord r;
                r.claim = idx;
                r.dev_year = j;
                r.payment = coin(rng);
                r.size = r.payment ? size(rng) / 3.0 : 0.0;
                r.close = coin(rng);
                p.records.push_back(r);
                if (r.close) break;
            }
        }
        reindex(p);
        p = derive_development_covariates(p);
        validate(p);
        auto back = ingest_csv_text(emit_csv(p), schema);
        REQUIRE(back.records.size() == p.records.size());
        for (std::size_t i = 0; i < p.records.size(); ++i) {
            CHECK(back.records[i].size == p.records[i].size);
            CHECK(back.records[i].total_amount_paid == p.records[i].total_amount_paid);
            CHECK(back.records[i].close == p.records[i].close);
        }
        for (std::size_t k = 0; k < p.claims.size(); ++k) {
            CHECK(back.claims[k].static_covariates == p.claims[k].static_covariates);
        }
        long total = 0;
        for (auto n : back.reported_counts) total += n;
        CHECK(total == static_cast<long>(back.claims.size()));
    }
}

TEST_CASE("truncate keeps only information known at the cutoff") {
    auto p = ingest_csv_text(
        "claim_id,reporting_year,dev_year,close,payment,size\n"
        "A,1,1,0,1,10\nA,1,2,0,1,20\nA,1,3,1,1,30\n"
        "B,2,1,0,0,0\nB,2,2,1,1,5\n"
        "C,3,1,1,1,7\n",
        {});
    auto t = truncate(p, 2);
    CHECK(t.window.tau == 2);
    CHECK(t.claims.size() == 2);
    CHECK(t.records.size() == 3);
    CHECK(t.reported_counts == std::vector<long>{1, 1});
    CHECK_THROWS_AS(truncate(p, 4), ConfigError);
}

TEST_CASE("csv parser handles quotes") {
    auto rows = csv::parse("a,\"b,c\",\"d\"\"e\"\n1,,3\n");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][1] == "b,c");
    CHECK(rows[0][2] == "d\"e");
    CHECK(rows[1][1].empty());
}
