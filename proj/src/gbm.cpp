#include "hrm/gbm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "hrm/error.hpp"

namespace hrm {

namespace {

struct Column {
    bool categorical = false;
    std::vector<double> numeric;          // NaN when missing
    std::vector<int> level;               // categorical codes
    int n_levels = 0;
    std::vector<std::size_t> order;       // numeric: rows sorted by value, NaN first
};

struct Split {
    int feature = -1;
    double gain = 0.0;
    double threshold = 0.0;
    std::vector<char> left_levels;
};

double loss_deviance(Family loss, std::span<const double> y, std::span<const double> w, const std::vector<double>& f) {
    double dev = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        if (w[i] == 0.0) continue;
        double mu = inverse_link(canonical_link(loss), loss == Family::bernoulli ? f[i] : std::min(f[i], 700.0));
        dev += w[i] * unit_deviance(loss, y[i], mu);
    }
    return dev;
}

class TreeBuilder {
public:
    TreeBuilder(const std::vector<Column>& cols, const std::vector<double>& grad, const std::vector<double>& w,
                const GbmHyperparameters& hp)
        : cols_(cols), grad_(grad), w_(w), hp_(hp) {}

    RegressionTree build(std::vector<std::size_t> rows, std::vector<std::vector<std::size_t>>& leaf_rows) {
        RegressionTree tree;
        in_node_.assign(grad_.size(), 0);
        grow(tree, std::move(rows), 0, leaf_rows);
        return tree;
    }

private:
    int grow(RegressionTree& tree, std::vector<std::size_t> rows, int depth,
             std::vector<std::vector<std::size_t>>& leaf_rows) {
        int id = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        Split best;
        if (depth < hp_.max_depth) best = find_split(rows);
        if (best.feature < 0) {
            tree.nodes[static_cast<std::size_t>(id)].value = static_cast<double>(leaf_rows.size());
            leaf_rows.push_back(std::move(rows));
            return id;
        }
        std::vector<std::size_t> left, right;
        const auto& col = cols_[static_cast<std::size_t>(best.feature)];
        for (auto r : rows) {
            bool go_left = col.categorical ? (col.level[r] >= 0 && best.left_levels[static_cast<std::size_t>(col.level[r])])
                                           : (std::isnan(col.numeric[r]) || col.numeric[r] < best.threshold);
            (go_left ? left : right).push_back(r);
        }
        rows.clear();
        rows.shrink_to_fit();
        {
            auto& node = tree.nodes[static_cast<std::size_t>(id)];
            node.feature = best.feature;
            node.threshold = best.threshold;
            node.left_levels = best.left_levels;
            node.gain = best.gain;
        }
        int l = grow(tree, std::move(left), depth + 1, leaf_rows);
        int r = grow(tree, std::move(right), depth + 1, leaf_rows);
        tree.nodes[static_cast<std::size_t>(id)].left = l;
        tree.nodes[static_cast<std::size_t>(id)].right = r;
        return id;
    }

    Split find_split(const std::vector<std::size_t>& rows) {
        Split best;
        double W = 0.0, S = 0.0;
        for (auto r : rows) {
            W += w_[r];
            S += w_[r] * grad_[r];
        }
        if (W < 2.0 * hp_.min_node_weight || W <= 0.0) return best;
        const double base = S * S / W;
        const double min_gain = 1e-12 * std::max(1.0, std::abs(base));
        for (auto r : rows) in_node_[r] = 1;
        for (std::size_t f = 0; f < cols_.size(); ++f) {
            const auto& col = cols_[f];
            if (col.categorical) {
                scan_categorical(static_cast<int>(f), col, rows, W, S, base, min_gain, best);
            } else {
                scan_numeric(static_cast<int>(f), col, W, S, base, min_gain, best);
            }
        }
        for (auto r : rows) in_node_[r] = 0;
        return best;
    }

    void scan_numeric(int f, const Column& col, double W, double S, double base, double min_gain, Split& best) {
        double wl = 0.0, sl = 0.0;
        bool have_prev = false;
        double prev = 0.0;
        for (auto r : col.order) {
            if (!in_node_[r]) continue;
            double x = col.numeric[r];
            bool nan = std::isnan(x);
            if (have_prev && !nan && (std::isnan(prev) || x > prev)) {
                double threshold = std::isnan(prev) ? x : 0.5 * (prev + x);
                consider(f, wl, sl, W, S, base, min_gain, best, [&](Split& s) { s.threshold = threshold; });
            }
            wl += w_[r];
            sl += w_[r] * grad_[r];
            prev = x;
            have_prev = true;
        }
    }

    void scan_categorical(int f, const Column& col, const std::vector<std::size_t>& rows, double W, double S,
                          double base, double min_gain, Split& best) {
        std::vector<double> lw(static_cast<std::size_t>(col.n_levels), 0.0), ls(lw.size(), 0.0);
        for (auto r : rows) {
            auto l = static_cast<std::size_t>(col.level[r]);
            lw[l] += w_[r];
            ls[l] += w_[r] * grad_[r];
        }
        std::vector<std::size_t> present;
        for (std::size_t l = 0; l < lw.size(); ++l) {
            if (lw[l] > 0.0) present.push_back(l);
        }
        std::stable_sort(present.begin(), present.end(),
                         [&](std::size_t a, std::size_t b) { return ls[a] / lw[a] < ls[b] / lw[b]; });
        double wl = 0.0, sl = 0.0;
        for (std::size_t k = 0; k + 1 < present.size(); ++k) {
            wl += lw[present[k]];
            sl += ls[present[k]];
            consider(f, wl, sl, W, S, base, min_gain, best, [&](Split& s) {
                s.left_levels.assign(lw.size(), 0);
                for (std::size_t m = 0; m <= k; ++m) s.left_levels[present[m]] = 1;
            });
        }
    }

    template <typename Fill>
    void consider(int f, double wl, double sl, double W, double S, double base, double min_gain, Split& best,
                  Fill fill) {
        double wr = W - wl;
        if (wl < hp_.min_node_weight || wr < hp_.min_node_weight) return;
        double sr = S - sl;
        double gain = sl * sl / wl + sr * sr / wr - base;
        // Strict improvement keeps the lowest feature index and split point on ties.
        if (gain > min_gain && gain > best.gain * (1.0 + 1e-12)) {
            best.feature = f;
            best.gain = gain;
            best.left_levels.clear();
            fill(best);
        }
    }

    const std::vector<Column>& cols_;
    const std::vector<double>& grad_;
    const std::vector<double>& w_;
    const GbmHyperparameters& hp_;
    std::vector<char> in_node_;
};

int leaf_of(const RegressionTree& tree, const GbmInput& in) {
    int id = 0;
    while (true) {
        const auto& node = tree.nodes[static_cast<std::size_t>(id)];
        if (node.feature < 0) return id;
        auto f = static_cast<std::size_t>(node.feature);
        bool go_left;
        if (!node.left_levels.empty()) {
            int l = in.level[f];
            go_left = l >= 0 && static_cast<std::size_t>(l) < node.left_levels.size() &&
                      node.left_levels[static_cast<std::size_t>(l)];
        } else {
            double x = in.numeric[f];
            go_left = std::isnan(x) || x < node.threshold;
        }
        id = go_left ? node.left : node.right;
    }
}

}  // namespace

void GbmHyperparameters::validate() const {
    if (n_trees < 0) throw ConfigError("n_trees must be nonnegative");
    if (max_depth < 1) throw ConfigError("max_depth must be at least 1");
    if (!(shrinkage > 0.0 && shrinkage <= 1.0)) throw ConfigError("shrinkage must lie in (0, 1]");
    if (!(bag_fraction > 0.0 && bag_fraction <= 1.0)) throw ConfigError("bag_fraction must lie in (0, 1]");
    if (!(min_node_weight > 0.0)) throw ConfigError("min_node_weight must be positive");
}

GbmEncoder::GbmEncoder(const GbmFit& fit, const FeatureLayout& layout) {
    for (const auto& f : fit.features) {
        slots_.push_back(layout.at(f.name));
        categorical_.push_back(f.categorical);
        names_.push_back(f.name);
        std::unordered_map<std::string, int> idx;
        for (std::size_t l = 0; l < f.levels.size(); ++l) idx[f.levels[l]] = static_cast<int>(l);
        level_index_.push_back(std::move(idx));
    }
}

void GbmEncoder::encode(const FeatureRow& row, GbmInput& out) const {
    out.numeric.assign(slots_.size(), std::numeric_limits<double>::quiet_NaN());
    out.level.assign(slots_.size(), -1);
    for (std::size_t f = 0; f < slots_.size(); ++f) {
        const auto& v = row[slots_[f]];
        if (categorical_[f]) {
            const std::string* s = std::get_if<std::string>(&v);
            const std::string& key = s ? *s : kNotAvailable;
            if (auto it = level_index_[f].find(key); it != level_index_[f].end()) out.level[f] = it->second;
        } else if (const double* x = std::get_if<double>(&v)) {
            out.numeric[f] = *x;
        } else if (!is_missing(v)) {
            throw PredictionError("covariate '" + names_[f] + "' must be numeric");
        }
    }
}

double gbm_predict_link(const GbmFit& fit, const GbmInput& input) {
    double f = fit.initial_value;
    for (const auto& tree : fit.trees) {
        f += fit.hyperparameters.shrinkage * tree.nodes[static_cast<std::size_t>(leaf_of(tree, input))].value;
    }
    return f;
}

double gbm_predict(const GbmFit& fit, const GbmInput& input) {
    return inverse_link(canonical_link(fit.loss), gbm_predict_link(fit, input));
}

GbmFit fit_gbm(const FeatureLayout& layout, std::span<const FeatureRow> rows, std::span<const std::string> features,
               std::span<const double> responses, Family loss, std::span<const double> weights,
               const GbmHyperparameters& hp, std::uint64_t seed) {
    hp.validate();
    if (loss != Family::bernoulli && loss != Family::gamma) throw ConfigError("gbm loss must be bernoulli or gamma");
    const std::size_t n = rows.size();
    if (responses.size() != n || weights.size() != n) throw InputError("row, response and weight counts differ");
    double wsum = 0.0, wy = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!(weights[i] >= 0.0)) throw DomainError("weights must be nonnegative");
        if (loss == Family::gamma && !(responses[i] > 0.0)) throw DomainError("gamma loss requires positive responses");
        if (loss == Family::bernoulli && responses[i] != 0.0 && responses[i] != 1.0) {
            throw DomainError("bernoulli responses must be 0 or 1");
        }
        if (weights[i] > 0.0) ++n_pos;
        wsum += weights[i];
        wy += weights[i] * responses[i];
    }
    if (!(wsum > 0.0)) throw DomainError("weights must have a positive total");
    if (loss == Family::bernoulli && (wy == 0.0 || wy == wsum)) {
        throw DegenerateError("all responses equal: baseline probability on the boundary");
    }

    GbmFit fit;
    fit.loss = loss;
    fit.hyperparameters = hp;
    double mean = wy / wsum;
    fit.initial_value = apply_link(canonical_link(loss), mean);

    // Weights normalised to mean 1 over positive-weight rows.
    std::vector<double> w(weights.begin(), weights.end());
    double scale = static_cast<double>(n_pos) / wsum;
    for (auto& x : w) x *= scale;

    std::vector<Column> cols;
    for (const auto& name : features) {
        std::size_t slot = layout.at(name);
        GbmFeature feat;
        feat.name = name;
        Column col;
        bool any_cat = false, any_num = false;
        std::set<std::string> levels;
        for (const auto& row : rows) {
            if (const auto* s = std::get_if<std::string>(&row[slot])) {
                any_cat = true;
                levels.insert(*s);
            } else if (std::holds_alternative<double>(row[slot])) {
                any_num = true;
            }
        }
        if (any_cat && any_num) throw ConfigError("covariate '" + name + "' mixes numeric and categorical values");
        col.categorical = feat.categorical = any_cat;
        if (col.categorical) {
            feat.levels.assign(levels.begin(), levels.end());
            if (std::any_of(rows.begin(), rows.end(), [&](const FeatureRow& r) { return is_missing(r[slot]); })) {
                if (!levels.count(kNotAvailable)) feat.levels.push_back(kNotAvailable);
            }
            std::unordered_map<std::string, int> idx;
            for (std::size_t l = 0; l < feat.levels.size(); ++l) idx[feat.levels[l]] = static_cast<int>(l);
            col.n_levels = static_cast<int>(feat.levels.size());
            col.level.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto* s = std::get_if<std::string>(&rows[i][slot]);
                col.level[i] = idx.at(s ? *s : kNotAvailable);
            }
        } else {
            col.numeric.resize(n);
            for (std::size_t i = 0; i < n; ++i) {
                const auto* x = std::get_if<double>(&rows[i][slot]);
                col.numeric[i] = x ? *x : std::numeric_limits<double>::quiet_NaN();
            }
            col.order.resize(n);
            std::iota(col.order.begin(), col.order.end(), std::size_t{0});
            std::stable_sort(col.order.begin(), col.order.end(), [&](std::size_t a, std::size_t b) {
                double xa = col.numeric[a], xb = col.numeric[b];
                if (std::isnan(xa)) return !std::isnan(xb);
                if (std::isnan(xb)) return false;
                return xa < xb;
            });
        }
        fit.features.push_back(std::move(feat));
        cols.push_back(std::move(col));
    }

    std::vector<double> f(n, fit.initial_value);
    double dev = loss_deviance(loss, responses, w, f);
    fit.train_deviance.push_back(dev);

    std::mt19937_64 rng(seed);
    std::vector<std::size_t> all(n);
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto bag_size = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(hp.bag_fraction * static_cast<double>(n))));
    std::vector<double> grad(n);
    std::vector<GbmInput> inputs;  // lazily built for the leaf lookup of all rows

    for (int t = 0; t < hp.n_trees; ++t) {
        for (std::size_t i = 0; i < n; ++i) {
            double mu = inverse_link(canonical_link(loss), loss == Family::bernoulli ? f[i] : std::min(f[i], 700.0));
            grad[i] = loss == Family::bernoulli ? responses[i] - mu : responses[i] / mu - 1.0;
        }
        std::vector<std::size_t> bag = all;
        if (bag_size < n) {
            for (std::size_t i = 0; i < bag_size; ++i) {
                std::uniform_int_distribution<std::size_t> pick(i, n - 1);
                std::swap(bag[i], bag[pick(rng)]);
            }
            bag.resize(bag_size);
            std::sort(bag.begin(), bag.end());
        }
        bag.erase(std::remove_if(bag.begin(), bag.end(), [&](std::size_t i) { return w[i] == 0.0; }), bag.end());

        std::vector<std::vector<std::size_t>> leaf_rows;
        TreeBuilder builder(cols, grad, w, hp);
        RegressionTree tree = builder.build(bag, leaf_rows);

        // Leaf values: Newton step for bernoulli, exact minimiser for gamma.
        std::vector<double> leaf_value(leaf_rows.size(), 0.0);
        for (std::size_t l = 0; l < leaf_rows.size(); ++l) {
            double num = 0.0, den = 0.0;
            for (auto i : leaf_rows[l]) {
                if (loss == Family::bernoulli) {
                    double p = inverse_link(Link::logit, f[i]);
                    num += w[i] * (responses[i] - p);
                    den += w[i] * p * (1.0 - p);
                } else {
                    num += w[i] * responses[i] * std::exp(-f[i]);
                    den += w[i];
                }
            }
            if (loss == Family::bernoulli) {
                leaf_value[l] = den > 1e-12 ? num / den : 0.0;
            } else {
                leaf_value[l] = (den > 0.0 && num > 0.0) ? std::log(num / den) : 0.0;
            }
        }
        // Map every training row to its leaf.
        std::vector<int> row_leaf(n);
        for (auto& node : tree.nodes) {
            if (node.feature < 0) node.value = leaf_value[static_cast<std::size_t>(node.value)];
        }
        {
            GbmInput in;
            in.numeric.resize(cols.size());
            in.level.resize(cols.size());
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t c = 0; c < cols.size(); ++c) {
                    if (cols[c].categorical) in.level[c] = cols[c].level[i];
                    else in.numeric[c] = cols[c].numeric[i];
                }
                row_leaf[i] = leaf_of(tree, in);
            }
        }
        // Halve the step until the full training deviance does not increase.
        double step = 1.0;
        std::vector<double> f_new(n);
        double dev_new = dev;
        for (int attempt = 0; attempt < 40; ++attempt) {
            for (std::size_t i = 0; i < n; ++i) {
                f_new[i] = f[i] + hp.shrinkage * step * tree.nodes[static_cast<std::size_t>(row_leaf[i])].value;
            }
            dev_new = loss_deviance(loss, responses, w, f_new);
            if (std::isfinite(dev_new) && dev_new <= dev) break;
            step *= 0.5;
        }
        if (!(std::isfinite(dev_new) && dev_new <= dev)) {
            step = 0.0;
            f_new = f;
            dev_new = dev;
        }
        if (step != 1.0) {
            for (auto& node : tree.nodes) {
                if (node.feature < 0) node.value *= step;
            }
        }
        f.swap(f_new);
        dev = dev_new;
        fit.train_deviance.push_back(dev);
        fit.trees.push_back(std::move(tree));
    }
    return fit;
}

std::map<std::string, double> gbm_importance(const GbmFit& fit) {
    if (fit.trees.empty()) throw StateError("importance is undefined for an empty ensemble");
    std::vector<double> gain(fit.features.size(), 0.0);
    for (const auto& tree : fit.trees) {
        for (const auto& node : tree.nodes) {
            if (node.feature >= 0) gain[static_cast<std::size_t>(node.feature)] += node.gain;
        }
    }
    double total = std::accumulate(gain.begin(), gain.end(), 0.0);
    if (!(total > 0.0)) throw StateError("importance is undefined: the ensemble has no splits");
    std::map<std::string, double> out;
    for (std::size_t f = 0; f < fit.features.size(); ++f) out[fit.features[f].name] = 100.0 * gain[f] / total;
    return out;
}

nlohmann::json GbmFit::to_json() const {
    nlohmann::json feats = nlohmann::json::array();
    for (const auto& f : features) feats.push_back({{"name", f.name}, {"categorical", f.categorical}, {"levels", f.levels}});
    nlohmann::json tree_list = nlohmann::json::array();
    for (const auto& t : trees) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const auto& n : t.nodes) {
            nlohmann::json node{{"feature", n.feature}, {"value", n.value}};
            if (n.feature >= 0) {
                node["left"] = n.left;
                node["right"] = n.right;
                node["gain"] = n.gain;
                if (n.left_levels.empty()) {
                    node["threshold"] = n.threshold;
                } else {
                    std::vector<int> lv(n.left_levels.begin(), n.left_levels.end());
                    node["left_levels"] = lv;
                }
            }
            nodes.push_back(std::move(node));
        }
        tree_list.push_back(std::move(nodes));
    }
    const auto& hp = hyperparameters;
    return {{"loss", to_string(loss)},
            {"initial_value", initial_value},
            {"hyperparameters",
             {{"n_trees", hp.n_trees},
              {"max_depth", hp.max_depth},
              {"shrinkage", hp.shrinkage},
              {"bag_fraction", hp.bag_fraction},
              {"min_node_weight", hp.min_node_weight}}},
            {"features", feats},
            {"trees", tree_list},
            {"train_deviance", train_deviance}};
}

GbmFit GbmFit::from_json(const nlohmann::json& j) {
    GbmFit fit;
    fit.loss = family_from_string(j.at("loss").get<std::string>());
    fit.initial_value = j.at("initial_value").get<double>();
    const auto& hp = j.at("hyperparameters");
    fit.hyperparameters.n_trees = hp.at("n_trees").get<int>();
    fit.hyperparameters.max_depth = hp.at("max_depth").get<int>();
    fit.hyperparameters.shrinkage = hp.at("shrinkage").get<double>();
    fit.hyperparameters.bag_fraction = hp.at("bag_fraction").get<double>();
    fit.hyperparameters.min_node_weight = hp.at("min_node_weight").get<double>();
    for (const auto& f : j.at("features")) {
        fit.features.push_back({f.at("name").get<std::string>(), f.at("categorical").get<bool>(),
                                f.at("levels").get<std::vector<std::string>>()});
    }
    for (const auto& t : j.at("trees")) {
        RegressionTree tree;
        for (const auto& n : t) {
            TreeNode node;
            node.feature = n.at("feature").get<int>();
            node.value = n.at("value").get<double>();
            if (node.feature >= 0) {
                node.left = n.at("left").get<int>();
                node.right = n.at("right").get<int>();
                node.gain = n.value("gain", 0.0);
                if (n.contains("left_levels")) {
                    for (int v : n.at("left_levels").get<std::vector<int>>()) node.left_levels.push_back(static_cast<char>(v));
                } else {
                    node.threshold = n.at("threshold").get<double>();
                }
            }
            tree.nodes.push_back(std::move(node));
        }
        fit.trees.push_back(std::move(tree));
    }
    fit.train_deviance = j.value("train_deviance", std::vector<double>{});
    return fit;
}

}  // namespace hrm
