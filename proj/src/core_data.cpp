#include "hrm/core_data.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <cmath>
#include <map>
#include <sstream>
#include <unordered_map>

#include "csv.hpp"
#include "hrm/error.hpp"

namespace hrm {

namespace {

const std::vector<std::string> kRequiredColumns = {"claim_id", "reporting_year", "dev_year",
                                                   "close",    "payment",        "size"};

std::string kind_name(CovariateKind k) {
    switch (k) {
        case CovariateKind::categorical: return "categorical";
        case CovariateKind::numeric: return "numeric";
        case CovariateKind::date: return "date";
    }
    return "categorical";
}

CovariateKind parse_kind(const std::string& s) {
    if (s == "categorical") return CovariateKind::categorical;
    if (s == "numeric") return CovariateKind::numeric;
    if (s == "date") return CovariateKind::date;
    throw ConfigError("unknown covariate type '" + s + "'");
}

bool parse_date(const std::string& s, double& days) {
    int y = 0;
    unsigned m = 0, d = 0;
    int consumed = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u%n", &y, &m, &d, &consumed) != 3) return false;
    if (static_cast<std::size_t>(consumed) != s.size()) return false;
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!ymd.ok()) return false;
    days = static_cast<double>(std::chrono::sys_days{ymd}.time_since_epoch().count());
    return true;
}

std::string format_date(double days) {
    std::chrono::sys_days sd{std::chrono::days{static_cast<long>(days)}};
    std::chrono::year_month_day ymd{sd};
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(ymd.year()),
                  static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
    return buf;
}

bool is_na_token(const std::string& s) { return s.empty() || s == kNotAvailable; }

Value parse_value(const std::string& raw, CovariateKind kind, const std::string& column, std::size_t line) {
    if (kind == CovariateKind::categorical) return is_na_token(raw) ? kNotAvailable : raw;
    if (is_na_token(raw)) return std::monostate{};
    double v = 0.0;
    bool ok = kind == CovariateKind::numeric ? csv::parse_double(raw, v) : parse_date(raw, v);
    if (!ok) {
        throw SchemaError("line " + std::to_string(line) + ": cannot parse '" + raw + "' in column '" +
                          column + "' as " + kind_name(kind));
    }
    return v;
}

std::string format_value(const Value& v, CovariateKind kind) {
    if (is_missing(v)) return kNotAvailable;
    if (const auto* s = std::get_if<std::string>(&v)) return *s;
    double x = std::get<double>(v);
    return kind == CovariateKind::date ? format_date(x) : csv::format_double(x);
}

long required_int(const csv::Row& row, std::size_t col, const char* name, std::size_t line) {
    long v = 0;
    if (!csv::parse_int(row[col], v)) {
        throw SchemaError("line " + std::to_string(line) + ": column '" + name + "' is not an integer: '" +
                          row[col] + "'");
    }
    return v;
}

bool required_flag(const csv::Row& row, std::size_t col, const char* name, std::size_t line) {
    long v = required_int(row, col, name, line);
    if (v != 0 && v != 1) {
        throw SchemaError("line " + std::to_string(line) + ": column '" + name + "' must be 0 or 1");
    }
    return v == 1;
}

}  // namespace

int ObservationWindow::observed_years(int reporting_year) const {
    return std::min(d, tau - reporting_year + 1);
}

std::optional<std::size_t> Portfolio::covariate_index(const std::string& name) const {
    for (std::size_t i = 0; i < covariates.size(); ++i) {
        if (covariates[i].name == name) return i;
    }
    return std::nullopt;
}

bool Portfolio::settled(std::size_t claim) const {
    auto recs = records_of(claim);
    return !recs.empty() && recs.back().close;
}

SchemaConfig SchemaConfig::from_json(const nlohmann::json& j) {
    SchemaConfig cfg;
    if (j.contains("columns")) {
        for (const auto& [name, spec] : j.at("columns").items()) {
            ColumnSpec col;
            col.name = name;
            col.kind = parse_kind(spec.value("type", std::string("categorical")));
            if (spec.contains("bins")) {
                BinSpec bins;
                bins.breakpoints = spec.at("bins").get<std::vector<double>>();
                if (spec.contains("labels")) bins.labels = spec.at("labels").get<std::vector<std::string>>();
                if (col.kind == CovariateKind::categorical) {
                    throw ConfigError("column '" + name + "': bins require a numeric or date column");
                }
                col.bins = std::move(bins);
            }
            cfg.columns.push_back(std::move(col));
        }
    }
    if (j.contains("window")) {
        const auto& w = j.at("window");
        ObservationWindow win;
        win.start_year = w.value("start_year", 1);
        win.tau = w.at("tau").get<int>();
        win.d = w.value("d", win.tau);
        if (win.tau < 1 || win.d < 1) throw ConfigError("window requires tau >= 1 and d >= 1");
        cfg.window = win;
    }
    cfg.first_modeled_year = j.value("first_modeled_year", 1);
    if (cfg.first_modeled_year != 1 && cfg.first_modeled_year != 2) {
        throw ConfigError("first_modeled_year must be 1 or 2");
    }
    return cfg;
}

nlohmann::json SchemaConfig::to_json() const {
    nlohmann::json j;
    j["columns"] = nlohmann::json::object();
    for (const auto& c : columns) {
        nlohmann::json spec{{"type", kind_name(c.kind)}};
        if (c.bins) {
            spec["bins"] = c.bins->breakpoints;
            if (!c.bins->labels.empty()) spec["labels"] = c.bins->labels;
        }
        j["columns"][c.name] = spec;
    }
    if (window) j["window"] = {{"start_year", window->start_year}, {"tau", window->tau}, {"d", window->d}};
    j["first_modeled_year"] = first_modeled_year;
    return j;
}

SchemaConfig SchemaConfig::load(const std::string& path) {
    try {
        return from_json(nlohmann::json::parse(csv::read_file(path)));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("schema config '" + path + "': " + e.what());
    }
}

std::string bin_label(double value, const BinSpec& bins) {
    const auto& b = bins.breakpoints;
    std::size_t idx = static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), value) - b.begin());
    if (!bins.labels.empty()) return bins.labels[idx];
    if (idx == 0) return csv::format_double(b.front()) + "-";
    if (idx == b.size()) return csv::format_double(b.back()) + "+";
    return "[" + csv::format_double(b[idx - 1]) + "," + csv::format_double(b[idx]) + ")";
}

std::vector<std::string> bin_continuous(std::span<const Value> values, const BinSpec& bins,
                                        const std::string& na_label) {
    const auto& b = bins.breakpoints;
    if (b.empty()) throw ConfigError("binning requires at least one breakpoint");
    for (std::size_t i = 1; i < b.size(); ++i) {
        if (!(b[i] > b[i - 1])) throw ConfigError("bin breakpoints must be strictly increasing");
    }
    if (!bins.labels.empty() && bins.labels.size() != b.size() + 1) {
        throw ConfigError("expected " + std::to_string(b.size() + 1) + " bin labels, got " +
                          std::to_string(bins.labels.size()));
    }
    std::vector<std::string> out;
    out.reserve(values.size());
    for (const auto& v : values) {
        if (const auto* x = std::get_if<double>(&v); x && !std::isnan(*x)) {
            out.push_back(bin_label(*x, bins));
        } else {
            out.push_back(na_label);
        }
    }
    return out;
}

void reindex(Portfolio& p) {
    p.reported_counts.assign(static_cast<std::size_t>(std::max(p.window.tau, 0)), 0);
    for (auto& c : p.claims) {
        c.record_count = 0;
        c.observed_years = p.window.observed_years(c.reporting_year);
        if (c.reporting_year >= 1 && c.reporting_year <= p.window.tau) {
            ++p.reported_counts[static_cast<std::size_t>(c.reporting_year - 1)];
        }
    }
    for (std::size_t i = 0; i < p.records.size(); ++i) {
        auto& c = p.claims.at(p.records[i].claim);
        if (c.record_count == 0) c.first_record = i;
        ++c.record_count;
    }
}

Portfolio derive_development_covariates(Portfolio p) {
    for (std::size_t k = 0; k < p.claims.size(); ++k) {
        const auto& c = p.claims[k];
        double total = 0.0;
        double last = 0.0;
        int last_year = 0;
        for (std::size_t r = c.first_record; r < c.first_record + c.record_count; ++r) {
            auto& rec = p.records[r];
            rec.calendar_year = c.reporting_year + rec.dev_year - 1;
            rec.size_last_year = (last_year == rec.dev_year - 1) ? last : 0.0;
            rec.total_amount_paid = total;
            total += rec.size;
            last = rec.size;
            last_year = rec.dev_year;
        }
    }
    return p;
}

void validate(const Portfolio& p) {
    const auto& w = p.window;
    if (w.tau < 1 || w.d < 1) throw ConsistencyError("window requires tau >= 1 and d >= 1");
    long total = 0;
    for (long n : p.reported_counts) total += n;
    if (total != static_cast<long>(p.claims.size())) {
        throw ConsistencyError("reported counts do not sum to the number of claims");
    }
    for (std::size_t k = 0; k < p.claims.size(); ++k) {
        const auto& c = p.claims[k];
        if (c.reporting_year < 1 || c.reporting_year > w.tau) {
            throw ConsistencyError("claim " + c.claim_id + ": reporting year outside the window");
        }
        if (c.static_covariates.size() != p.covariates.size()) {
            throw ConsistencyError("claim " + c.claim_id + ": covariate count mismatch");
        }
        auto recs = p.records_of(k);
        int expected = 1;
        bool closed = false;
        for (const auto& r : recs) {
            if (r.claim != k) throw ConsistencyError("record does not resolve to claim " + c.claim_id);
            if (closed) {
                throw ConsistencyError("claim " + c.claim_id + ": record at dev year " +
                                       std::to_string(r.dev_year) + " after settlement (reopening)");
            }
            if (r.dev_year != expected) {
                throw ConsistencyError("claim " + c.claim_id + ": development years must be contiguous from 1");
            }
            if (r.dev_year > c.observed_years) {
                throw ConsistencyError("claim " + c.claim_id + ": dev year " + std::to_string(r.dev_year) +
                                       " beyond observed years " + std::to_string(c.observed_years));
            }
            if (r.size < 0.0 || !std::isfinite(r.size)) {
                throw ConsistencyError("claim " + c.claim_id + ": negative or non-finite size");
            }
            if ((r.size > 0.0) != r.payment) {
                throw ConsistencyError("claim " + c.claim_id + ": payment flag inconsistent with size");
            }
            closed = r.close;
            ++expected;
        }
        if (!closed && static_cast<int>(recs.size()) != c.observed_years && c.observed_years > 0) {
            throw ConsistencyError("claim " + c.claim_id + ": open claim without a record for every observed year");
        }
    }
}

void apply_bins(Portfolio& p, const SchemaConfig& schema) {
    for (const auto& col : schema.columns) {
        if (!col.bins) continue;
        auto src = p.covariate_index(col.name);
        if (!src) throw SchemaError("missing column '" + col.name + "'");
        std::vector<Value> values;
        values.reserve(p.claims.size());
        for (const auto& c : p.claims) values.push_back(c.static_covariates[*src]);
        auto labels = bin_continuous(values, *col.bins);
        std::string name = col.name + "_bin";
        auto dst = p.covariate_index(name);
        if (!dst) {
            p.covariates.push_back({name, CovariateKind::categorical, true});
            for (auto& c : p.claims) c.static_covariates.emplace_back();
            dst = p.covariates.size() - 1;
        }
        for (std::size_t k = 0; k < p.claims.size(); ++k) p.claims[k].static_covariates[*dst] = labels[k];
    }
}

void add_first_year_covariates(Portfolio& p) {
    auto add = [&](const std::string& name) {
        p.covariates.push_back({name, CovariateKind::numeric, true});
        for (auto& c : p.claims) c.static_covariates.emplace_back(0.0);
        return p.covariates.size() - 1;
    };
    auto pay = p.covariate_index("payment_year1");
    if (!pay) pay = add("payment_year1");
    auto size = p.covariate_index("size_year1");
    if (!size) size = add("size_year1");
    for (std::size_t k = 0; k < p.claims.size(); ++k) {
        auto recs = p.records_of(k);
        if (recs.empty()) continue;
        p.claims[k].static_covariates[*pay] = recs.front().payment ? 1.0 : 0.0;
        p.claims[k].static_covariates[*size] = recs.front().size;
    }
}

Portfolio ingest_csv_text(const std::string& text, const SchemaConfig& schema) {
    auto rows = csv::parse(text);
    if (rows.empty()) throw SchemaError("missing header row");
    const auto& header = rows.front();
    std::unordered_map<std::string, std::size_t> col;
    for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
    auto require = [&](const std::string& name) {
        auto it = col.find(name);
        if (it == col.end()) throw SchemaError("missing column '" + name + "'");
        return it->second;
    };
    std::array<std::size_t, 6> req{};
    for (std::size_t i = 0; i < kRequiredColumns.size(); ++i) req[i] = require(kRequiredColumns[i]);
    std::vector<std::size_t> cov_cols;
    for (const auto& c : schema.columns) cov_cols.push_back(require(c.name));

    struct RawRow {
        int reporting_year;
        int dev_year;
        bool close, payment;
        double size;
        std::vector<Value> covs;
        std::size_t line;
    };
    std::map<std::string, std::vector<RawRow>> by_claim;
    int max_calendar = 0;
    int max_reporting = 0;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        std::size_t line = r + 1;
        if (row.size() == 1 && row[0].empty()) continue;
        if (row.size() != header.size()) {
            throw SchemaError("line " + std::to_string(line) + ": expected " + std::to_string(header.size()) +
                              " fields, got " + std::to_string(row.size()));
        }
        RawRow raw;
        raw.line = line;
        raw.reporting_year = static_cast<int>(required_int(row, req[1], "reporting_year", line));
        raw.dev_year = static_cast<int>(required_int(row, req[2], "dev_year", line));
        raw.close = required_flag(row, req[3], "close", line);
        raw.payment = required_flag(row, req[4], "payment", line);
        if (!csv::parse_double(row[req[5]], raw.size)) {
            throw SchemaError("line " + std::to_string(line) + ": column 'size' is not a number");
        }
        if (raw.reporting_year < 1 || raw.dev_year < 1) {
            throw ConsistencyError("line " + std::to_string(line) + ": reporting_year and dev_year are 1-based");
        }
        if (raw.size < 0.0) throw ConsistencyError("line " + std::to_string(line) + ": negative size");
        if (raw.size > 0.0 && !raw.payment) {
            throw ConsistencyError("line " + std::to_string(line) + ": size > 0 with payment = 0");
        }
        if (raw.size == 0.0 && raw.payment) {
            throw ConsistencyError("line " + std::to_string(line) + ": payment = 1 with size = 0");
        }
        for (std::size_t c = 0; c < cov_cols.size(); ++c) {
            raw.covs.push_back(parse_value(row[cov_cols[c]], schema.columns[c].kind, schema.columns[c].name, line));
        }
        max_calendar = std::max(max_calendar, raw.reporting_year + raw.dev_year - 1);
        max_reporting = std::max(max_reporting, raw.reporting_year);
        by_claim[row[req[0]]].push_back(std::move(raw));
    }

    Portfolio p;
    if (schema.window) {
        p.window = *schema.window;
    } else {
        p.window.tau = std::max(1, max_calendar);
        p.window.d = p.window.tau;
    }
    for (const auto& c : schema.columns) p.covariates.push_back({c.name, c.kind, false});

    for (auto& [id, claim_rows] : by_claim) {
        std::sort(claim_rows.begin(), claim_rows.end(),
                  [](const RawRow& a, const RawRow& b) { return a.dev_year < b.dev_year; });
        for (std::size_t i = 1; i < claim_rows.size(); ++i) {
            if (claim_rows[i].dev_year == claim_rows[i - 1].dev_year) {
                throw DuplicateRecordError("line " + std::to_string(claim_rows[i].line) + ": duplicate record for claim '" +
                                           id + "' dev year " + std::to_string(claim_rows[i].dev_year));
            }
        }
        Claim claim;
        claim.claim_id = id;
        claim.reporting_year = claim_rows.front().reporting_year;
        claim.static_covariates = claim_rows.front().covs;
        std::size_t k = p.claims.size();
        for (const auto& raw : claim_rows) {
            if (raw.reporting_year != claim.reporting_year) {
                throw ConsistencyError("line " + std::to_string(raw.line) + ": claim '" + id +
                                       "' changes reporting year");
            }
            for (std::size_t c = 0; c < raw.covs.size(); ++c) {
                if (raw.covs[c] != claim.static_covariates[c]) {
                    throw ConsistencyError("line " + std::to_string(raw.line) + ": static covariate '" +
                                           schema.columns[c].name + "' changes within claim '" + id + "'");
                }
            }
            DevelopmentRecord rec;
            rec.claim = k;
            rec.dev_year = raw.dev_year;
            rec.close = raw.close;
            rec.payment = raw.payment;
            rec.size = raw.size;
            p.records.push_back(rec);
        }
        p.claims.push_back(std::move(claim));
    }
    reindex(p);
    validate(p);
    p = derive_development_covariates(std::move(p));
    apply_bins(p, schema);
    if (schema.first_modeled_year == 2) add_first_year_covariates(p);
    return p;
}

Portfolio ingest_csv(const std::string& path, const SchemaConfig& schema) {
    return ingest_csv_text(csv::read_file(path), schema);
}

std::string emit_csv(const Portfolio& p) {
    std::string out = "claim_id,reporting_year,dev_year,close,payment,size";
    std::vector<std::size_t> cols;
    for (std::size_t i = 0; i < p.covariates.size(); ++i) {
        if (p.covariates[i].derived) continue;
        cols.push_back(i);
        out += "," + csv::quote_if_needed(p.covariates[i].name);
    }
    out += "\n";
    for (const auto& rec : p.records) {
        const auto& c = p.claims[rec.claim];
        out += csv::quote_if_needed(c.claim_id);
        out += "," + std::to_string(c.reporting_year) + "," + std::to_string(rec.dev_year) + "," +
               (rec.close ? "1" : "0") + "," + (rec.payment ? "1" : "0") + "," + csv::format_double(rec.size);
        for (auto i : cols) {
            out += "," + csv::quote_if_needed(format_value(c.static_covariates[i], p.covariates[i].kind));
        }
        out += "\n";
    }
    return out;
}

void write_csv(const Portfolio& p, const std::string& path) { csv::write_file(path, emit_csv(p)); }

Portfolio truncate(const Portfolio& p, int cutoff) {
    if (cutoff < 1 || cutoff > p.window.tau) {
        throw ConfigError("cutoff " + std::to_string(cutoff) + " outside the observation window 1.." +
                          std::to_string(p.window.tau));
    }
    Portfolio out;
    out.window = p.window;
    out.window.tau = cutoff;
    out.covariates = p.covariates;
    std::vector<std::size_t> remap(p.claims.size(), SIZE_MAX);
    for (std::size_t k = 0; k < p.claims.size(); ++k) {
        if (p.claims[k].reporting_year > cutoff) continue;
        remap[k] = out.claims.size();
        out.claims.push_back(p.claims[k]);
    }
    for (const auto& rec : p.records) {
        if (remap[rec.claim] == SIZE_MAX) continue;
        if (p.claims[rec.claim].reporting_year + rec.dev_year - 1 > cutoff) continue;
        auto r = rec;
        r.claim = remap[rec.claim];
        out.records.push_back(r);
    }
    reindex(out);
    return derive_development_covariates(std::move(out));
}

}  // namespace hrm
