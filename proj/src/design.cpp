#include "hrm/design.hpp"

#include <algorithm>
#include <set>

#include "hrm/error.hpp"
#include "hrm/log.hpp"

namespace hrm {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        auto pos = s.find(sep, start);
        out.push_back(s.substr(start, pos - start));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::vector<std::string> expand_terms(std::span<const std::string> terms) {
    std::vector<std::string> out;
    auto add = [&](const std::string& t) {
        if (std::find(out.begin(), out.end(), t) == out.end()) out.push_back(t);
    };
    for (const auto& t : terms) {
        if (t.find('*') == std::string::npos) {
            add(t);
            continue;
        }
        auto parts = split(t, '*');
        for (const auto& p : parts) add(p);
        std::string joined;
        for (std::size_t i = 0; i < parts.size(); ++i) joined += (i ? ":" : "") + parts[i];
        add(joined);
    }
    return out;
}

DesignEncoder DesignEncoder::build(const FeatureLayout& layout, std::span<const std::string> terms,
                                   std::span<const FeatureRow> rows) {
    DesignEncoder enc;
    enc.terms_ = expand_terms(terms);
    std::unordered_map<std::string, int> factor_of;
    auto factor_for = [&](const std::string& name) {
        if (auto it = factor_of.find(name); it != factor_of.end()) return it->second;
        Factor f;
        f.name = name;
        f.slot = layout.at(name);
        bool seen_numeric = false, seen_categorical = false;
        std::set<std::string> levels;
        for (const auto& row : rows) {
            const auto& v = row[f.slot];
            if (const auto* s = std::get_if<std::string>(&v)) {
                seen_categorical = true;
                levels.insert(*s);
            } else if (std::holds_alternative<double>(v)) {
                seen_numeric = true;
            } else {
                // Categorical gaps were mapped to the NA level at ingestion.
                throw PredictionError("covariate '" + name + "' is missing in a training row");
            }
        }
        if (seen_numeric && seen_categorical) throw ConfigError("covariate '" + name + "' mixes numeric and categorical values");
        f.categorical = seen_categorical;
        f.levels.assign(levels.begin(), levels.end());
        enc.factors_.push_back(std::move(f));
        int idx = static_cast<int>(enc.factors_.size()) - 1;
        factor_of[name] = idx;
        return idx;
    };

    enc.columns_.push_back({});
    enc.column_names_.push_back("(Intercept)");
    for (const auto& term : enc.terms_) {
        auto parts = split(term, ':');
        std::vector<int> fs;
        for (const auto& p : parts) fs.push_back(factor_for(p));
        // Cartesian product over non-reference levels of categorical parts.
        std::vector<Column> cols{{}};
        std::vector<std::string> names{""};
        for (int fi : fs) {
            const auto& f = enc.factors_[static_cast<std::size_t>(fi)];
            std::vector<Column> next;
            std::vector<std::string> next_names;
            for (std::size_t c = 0; c < cols.size(); ++c) {
                std::string prefix = names[c].empty() ? "" : names[c] + ":";
                if (!f.categorical) {
                    auto col = cols[c];
                    col.push_back({fi, -1});
                    next.push_back(std::move(col));
                    next_names.push_back(prefix + f.name);
                    continue;
                }
                for (std::size_t l = 1; l < f.levels.size(); ++l) {
                    auto col = cols[c];
                    col.push_back({fi, static_cast<int>(l)});
                    next.push_back(std::move(col));
                    next_names.push_back(prefix + f.name + "=" + f.levels[l]);
                }
            }
            cols = std::move(next);
            names = std::move(next_names);
        }
        for (std::size_t c = 0; c < cols.size(); ++c) {
            enc.columns_.push_back(std::move(cols[c]));
            enc.column_names_.push_back(std::move(names[c]));
        }
    }
    enc.index_levels();
    return enc;
}

void DesignEncoder::index_levels() {
    for (auto& f : factors_) {
        f.level_index.clear();
        for (std::size_t l = 0; l < f.levels.size(); ++l) f.level_index[f.levels[l]] = static_cast<int>(l);
    }
}

std::vector<std::string> DesignEncoder::features() const {
    std::vector<std::string> out;
    for (const auto& f : factors_) out.push_back(f.name);
    return out;
}

void DesignEncoder::encode(const FeatureRow& row, std::span<double> out) const {
    // Resolve each factor once: level index for categoricals, value for numerics.
    thread_local std::vector<double> numeric;
    thread_local std::vector<int> level;
    numeric.assign(factors_.size(), 0.0);
    level.assign(factors_.size(), 0);
    for (std::size_t i = 0; i < factors_.size(); ++i) {
        const auto& f = factors_[i];
        const auto& v = row[f.slot];
        if (f.categorical) {
            const std::string* s = std::get_if<std::string>(&v);
            if (!s) {
                if (is_missing(v)) {
                    auto it = f.level_index.find(kNotAvailable);
                    level[i] = it == f.level_index.end() ? 0 : it->second;
                    continue;
                }
                throw PredictionError("covariate '" + f.name + "' must be categorical");
            }
            auto it = f.level_index.find(*s);
            if (it == f.level_index.end()) {
                warn_once("unseen level '" + *s + "' of covariate '" + f.name + "' mapped to reference level '" +
                          (f.levels.empty() ? std::string() : f.levels[0]) + "'");
                level[i] = 0;
            } else {
                level[i] = it->second;
            }
        } else {
            const double* x = std::get_if<double>(&v);
            if (!x) throw PredictionError("missing required covariate '" + f.name + "'");
            numeric[i] = *x;
        }
    }
    for (std::size_t c = 0; c < columns_.size(); ++c) {
        double value = 1.0;
        for (const auto& comp : columns_[c]) {
            auto fi = static_cast<std::size_t>(comp.factor);
            if (comp.level < 0) {
                value *= numeric[fi];
            } else if (level[fi] != comp.level) {
                value = 0.0;
                break;
            }
        }
        out[c] = value;
    }
}

Eigen::MatrixXd DesignEncoder::encode_all(std::span<const FeatureRow> rows) const {
    Eigen::MatrixXd x(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(columns_.size()));
    std::vector<double> buf(columns_.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        encode(rows[i], buf);
        for (std::size_t c = 0; c < buf.size(); ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = buf[c];
    }
    return x;
}

void DesignEncoder::bind(const FeatureLayout& layout) {
    for (auto& f : factors_) f.slot = layout.at(f.name);
}

nlohmann::json DesignEncoder::to_json() const {
    nlohmann::json factors = nlohmann::json::array();
    for (const auto& f : factors_) {
        factors.push_back({{"name", f.name}, {"categorical", f.categorical}, {"levels", f.levels}});
    }
    nlohmann::json columns = nlohmann::json::array();
    for (const auto& col : columns_) {
        nlohmann::json c = nlohmann::json::array();
        for (const auto& comp : col) c.push_back({comp.factor, comp.level});
        columns.push_back(c);
    }
    return {{"terms", terms_}, {"factors", factors}, {"columns", columns}, {"column_names", column_names_}};
}

DesignEncoder DesignEncoder::from_json(const nlohmann::json& j, const FeatureLayout& layout) {
    DesignEncoder enc;
    enc.terms_ = j.at("terms").get<std::vector<std::string>>();
    for (const auto& f : j.at("factors")) {
        Factor fac;
        fac.name = f.at("name").get<std::string>();
        fac.categorical = f.at("categorical").get<bool>();
        fac.levels = f.at("levels").get<std::vector<std::string>>();
        enc.factors_.push_back(std::move(fac));
    }
    for (const auto& c : j.at("columns")) {
        Column col;
        for (const auto& comp : c) col.push_back({comp.at(0).get<int>(), comp.at(1).get<int>()});
        enc.columns_.push_back(std::move(col));
    }
    enc.column_names_ = j.at("column_names").get<std::vector<std::string>>();
    enc.index_levels();
    enc.bind(layout);
    return enc;
}

}  // namespace hrm
