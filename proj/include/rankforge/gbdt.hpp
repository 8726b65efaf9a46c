#pragma once

// Gradient-boosted oblivious trees on binary logloss. Categorical features
// enter the trees as ordered target statistics: during training each tree
// reads statistics accumulated along one of several row permutations (a row
// never sees its own label), at inference the statistics come from tables
// over the full training data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankforge/errors.hpp"
#include "rankforge/evalrank.hpp"
#include "rankforge/preprocess.hpp"
#include "rankforge/rng.hpp"

namespace rankforge::gbdt {

using json = nlohmann::json;
using preprocess::FeatureMatrix;

struct GbdtParams {
    double learning_rate = 0.03;
    double l2_leaf_reg = 3.0;
    int n_trees = 500;
    int max_depth = 6;
    int n_bins = 255;
    double prior_weight = 1.0;                 // a in the target-statistic formula
    std::optional<double> prior;               // p; defaults to the global positive rate
    int n_permutations = 4;
    std::uint64_t seed = 42;

    void validate() const {
        if (!(learning_rate > 0.0)) fail("InvalidParams", "learning_rate must be positive");
        if (!(l2_leaf_reg >= 0.0)) fail("InvalidParams", "l2_leaf_reg must be non-negative");
        if (n_trees < 1) fail("InvalidParams", "n_trees must be positive");
        if (max_depth < 0 || max_depth > 16) fail("InvalidParams", "max_depth must be in [0, 16]");
        if (n_bins < 2 || n_bins > 65535) fail("InvalidParams", "n_bins must be in [2, 65535]");
        if (!(prior_weight > 0.0)) fail("InvalidParams", "prior_weight must be positive");
        if (prior && (*prior < 0.0 || *prior > 1.0)) {
            fail("InvalidParams", "prior must be in [0, 1]");
        }
        if (n_permutations < 1) fail("InvalidParams", "n_permutations must be positive");
    }
};

struct GradientPair {
    double g = 0.0;
    double h = 0.0;
};

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline GradientPair logloss_grad(int y, double score) {
    const double p = sigmoid(score);
    return {p - static_cast<double>(y), p * (1.0 - p)};
}

// output[r] = (sum of labels of same-category rows earlier in perm + a*p) / (count + a)
inline std::vector<double> ordered_target_statistics(std::span<const std::int32_t> categories,
                                                     std::span<const std::uint8_t> y,
                                                     std::span<const std::size_t> perm, double a,
                                                     double p) {
    if (categories.size() != y.size() || categories.size() != perm.size()) {
        fail("LengthMismatch", "categories/labels/permutation sizes differ");
    }
    std::vector<double> out(categories.size(), 0.0);
    std::unordered_map<std::int32_t, std::pair<double, double>> running;  // id -> (sum_y, count)
    running.reserve(categories.size());
    for (const std::size_t r : perm) {
        auto& [sum_y, count] = running[categories[r]];
        out[r] = (sum_y + a * p) / (count + a);
        sum_y += y[r];
        count += 1.0;
    }
    return out;
}

// Full-data statistics for one categorical feature, used at inference.
struct CategoryTable {
    std::unordered_map<std::int32_t, std::pair<double, double>> stats;  // id -> (sum_y, count)

    double encode(std::int32_t id, double a, double p) const {
        const auto it = stats.find(id);
        if (it == stats.end()) return p;
        return (it->second.first + a * p) / (it->second.second + a);
    }
};

struct LevelSplit {
    int feature = 0;       // index into the combined layout, categoricals first
    double threshold = 0;  // go right when value > threshold
};

struct ObliviousTree {
    std::vector<LevelSplit> splits;    // one per level
    std::vector<double> leaf_values;   // 2^depth entries

    std::size_t leaf_for(std::span<const double> feature_values) const {
        std::size_t leaf = 0;
        for (std::size_t level = 0; level < splits.size(); ++level) {
            if (feature_values[splits[level].feature] > splits[level].threshold) {
                leaf |= std::size_t{1} << level;
            }
        }
        return leaf;
    }
};

struct GbdtModel {
    double base_score = 0.0;
    double prior = 0.5;
    double prior_weight = 1.0;
    std::vector<std::string> categorical_names;
    std::vector<std::string> continuous_names;
    std::vector<CategoryTable> category_tables;   // one per categorical feature
    std::vector<ObliviousTree> trees;
    std::vector<double> split_improvements;       // per combined feature, unnormalized
    std::string encoder_provenance;
    GbdtParams params;

    std::size_t n_features() const { return categorical_names.size() + continuous_names.size(); }

    std::vector<std::string> feature_names() const {
        std::vector<std::string> names = categorical_names;
        names.insert(names.end(), continuous_names.begin(), continuous_names.end());
        return names;
    }

    // Percentages summing to 100 (all zeros when no split ever improved).
    std::vector<double> feature_importance() const {
        std::vector<double> out(split_improvements.size(), 0.0);
        const double total =
            std::accumulate(split_improvements.begin(), split_improvements.end(), 0.0);
        if (total <= 0.0) return out;
        for (std::size_t i = 0; i < out.size(); ++i) {
            out[i] = 100.0 * split_improvements[i] / total;
        }
        return out;
    }

    // Combined per-row feature vector in model layout, categoricals via tables.
    void check_compatible(const FeatureMatrix& m) const {
        if (m.encoder_provenance != encoder_provenance) {
            fail("EncoderMismatch", "feature matrix was built with a different encoder");
        }
        if (m.categorical_names != categorical_names || m.continuous_names != continuous_names) {
            fail("EncoderMismatch", "feature layout differs from the model's");
        }
    }

    std::vector<double> predict_raw(const FeatureMatrix& m) const {
        check_compatible(m);
        const std::size_t n_cat = categorical_names.size();
        std::vector<double> scores(m.n_rows, base_score);
        std::vector<double> feats(n_features(), 0.0);
        for (std::size_t i = 0; i < m.n_rows; ++i) {
            for (std::size_t c = 0; c < n_cat; ++c) {
                feats[c] = category_tables[c].encode(m.categorical[c][i], prior_weight, prior);
            }
            for (std::size_t k = 0; k < continuous_names.size(); ++k) {
                feats[n_cat + k] = m.continuous[k][i];
            }
            for (const auto& tree : trees) {
                scores[i] += tree.leaf_values[tree.leaf_for(feats)];
            }
        }
        return scores;
    }

    std::vector<double> predict_proba(const FeatureMatrix& m) const {
        std::vector<double> out = predict_raw(m);
        for (double& s : out) s = sigmoid(s);
        return out;
    }
};

struct FitResult {
    GbdtModel model;
    std::vector<double> train_curve;  // train logloss after each tree
    std::vector<double> valid_curve;  // empty when no validation set was given
};

namespace detail {

// Equal-frequency thresholds; bin(x) = number of thresholds below x, so
// bin(x) > c exactly when x > thresholds[c].
struct BinnedColumn {
    std::vector<std::uint16_t> bins;
    std::vector<double> thresholds;  // ascending, at most n_bins - 1
};

inline BinnedColumn bin_column(std::span<const double> values, int n_bins) {
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

    BinnedColumn out;
    const std::size_t m = sorted.size();
    if (m >= 2) {
        if (m <= static_cast<std::size_t>(n_bins)) {
            out.thresholds.assign(sorted.begin(), sorted.end() - 1);
        } else {
            for (int j = 1; j < n_bins; ++j) {
                const std::size_t idx = j * m / n_bins;
                out.thresholds.push_back(sorted[idx - 1]);
            }
            out.thresholds.erase(std::unique(out.thresholds.begin(), out.thresholds.end()),
                                 out.thresholds.end());
        }
    }
    out.bins.resize(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        // count of thresholds strictly below the value, so bin > c iff value > thresholds[c]
        out.bins[i] = static_cast<std::uint16_t>(
            std::lower_bound(out.thresholds.begin(), out.thresholds.end(), values[i]) -
            out.thresholds.begin());
    }
    return out;
}

}  // namespace detail

inline FitResult fit_eval(const FeatureMatrix& train, const GbdtParams& params,
                          const FeatureMatrix* valid = nullptr) {
    params.validate();
    if (!train.labels) fail("InvalidParams", "training data has no labels");
    if (valid && !valid->labels) fail("InvalidParams", "validation data has no labels");
    const std::size_t n = train.n_rows;
    if (n < 2) fail("EmptyMatrix", "training needs at least 2 rows, got " + std::to_string(n));
    const auto& y = *train.labels;

    double pos = 0.0;
    for (const auto yi : y) pos += yi;
    const double neg = static_cast<double>(n) - pos;
    if (pos == 0.0 || neg == 0.0) fail("SingleClassError", "labels contain a single class");

    const double prior = params.prior.value_or(pos / static_cast<double>(n));
    const double a = params.prior_weight;
    const double lambda = params.l2_leaf_reg;
    const std::size_t n_cat = train.categorical_names.size();
    const std::size_t n_cont = train.continuous_names.size();
    const std::size_t n_feat = n_cat + n_cont;
    if (n_feat == 0) fail("InvalidParams", "no features");

    Rng rng(params.seed);
    std::vector<std::vector<std::size_t>> perms;
    for (int k = 0; k < params.n_permutations; ++k) perms.push_back(rng.permutation(n));

    // Per-permutation binned features. Continuous columns do not depend on
    // the permutation; categorical slots hold that permutation's statistics.
    std::vector<std::vector<detail::BinnedColumn>> binned(perms.size());
    std::vector<detail::BinnedColumn> binned_cont(n_cont);
    for (std::size_t k = 0; k < n_cont; ++k) {
        binned_cont[k] = detail::bin_column(train.continuous[k], params.n_bins);
    }
    for (std::size_t pi = 0; pi < perms.size(); ++pi) {
        binned[pi].resize(n_feat);
        for (std::size_t c = 0; c < n_cat; ++c) {
            const auto ts =
                ordered_target_statistics(train.categorical[c], y, perms[pi], a, prior);
            binned[pi][c] = detail::bin_column(ts, params.n_bins);
        }
        for (std::size_t k = 0; k < n_cont; ++k) binned[pi][n_cat + k] = binned_cont[k];
    }

    GbdtModel model;
    model.base_score = std::log(pos / neg);
    model.prior = prior;
    model.prior_weight = a;
    model.categorical_names = train.categorical_names;
    model.continuous_names = train.continuous_names;
    model.split_improvements.assign(n_feat, 0.0);
    model.encoder_provenance = train.encoder_provenance;
    model.params = params;
    model.category_tables.resize(n_cat);
    for (std::size_t c = 0; c < n_cat; ++c) {
        auto& table = model.category_tables[c].stats;
        for (std::size_t i = 0; i < n; ++i) {
            auto& [sum_y, count] = table[train.categorical[c][i]];
            sum_y += y[i];
            count += 1.0;
        }
    }

    // Inference-style feature values for the validation curve.
    std::vector<std::vector<double>> valid_feats;
    std::vector<double> valid_scores;
    if (valid) {
        model.check_compatible(*valid);
        valid_feats.resize(n_feat);
        for (std::size_t c = 0; c < n_cat; ++c) {
            valid_feats[c].resize(valid->n_rows);
            for (std::size_t i = 0; i < valid->n_rows; ++i) {
                valid_feats[c][i] =
                    model.category_tables[c].encode(valid->categorical[c][i], a, prior);
            }
        }
        for (std::size_t k = 0; k < n_cont; ++k) valid_feats[n_cat + k] = valid->continuous[k];
        valid_scores.assign(valid->n_rows, model.base_score);
    }

    FitResult result;
    std::vector<double> scores(n, model.base_score);
    std::vector<std::size_t> leaf_of(n);
    std::vector<double> grad(n), hess(n);

    for (int t = 0; t < params.n_trees; ++t) {
        const auto& feats = binned[static_cast<std::size_t>(t) % perms.size()];
        for (std::size_t i = 0; i < n; ++i) {
            const auto gp = logloss_grad(y[i], scores[i]);
            grad[i] = gp.g;
            hess[i] = gp.h;
        }

        ObliviousTree tree;
        std::fill(leaf_of.begin(), leaf_of.end(), 0);
        std::size_t n_leaves = 1;
        for (int level = 0; level < params.max_depth; ++level) {
            // Current per-leaf totals give the no-split score for this level.
            std::vector<double> leaf_g(n_leaves, 0.0), leaf_h(n_leaves, 0.0);
            for (std::size_t i = 0; i < n; ++i) {
                leaf_g[leaf_of[i]] += grad[i];
                leaf_h[leaf_of[i]] += hess[i];
            }
            double parent_score = 0.0;
            for (std::size_t l = 0; l < n_leaves; ++l) {
                parent_score += leaf_g[l] * leaf_g[l] / (leaf_h[l] + lambda);
            }

            double best_gain = -std::numeric_limits<double>::infinity();
            int best_feature = -1;
            std::size_t best_cut = 0;
            std::vector<double> hist_g, hist_h;
            for (std::size_t f = 0; f < n_feat; ++f) {
                const auto& col = feats[f];
                const std::size_t n_cuts = col.thresholds.size();
                if (n_cuts == 0) continue;
                const std::size_t width = n_cuts + 1;
                hist_g.assign(n_leaves * width, 0.0);
                hist_h.assign(n_leaves * width, 0.0);
                for (std::size_t i = 0; i < n; ++i) {
                    const std::size_t slot = leaf_of[i] * width + col.bins[i];
                    hist_g[slot] += grad[i];
                    hist_h[slot] += hess[i];
                }
                for (std::size_t cut = 0; cut < n_cuts; ++cut) {
                    double gain = 0.0;
                    for (std::size_t l = 0; l < n_leaves; ++l) {
                        double gl = 0.0, hl = 0.0;
                        for (std::size_t b = 0; b <= cut; ++b) {
                            gl += hist_g[l * width + b];
                            hl += hist_h[l * width + b];
                        }
                        const double gr = leaf_g[l] - gl;
                        const double hr = leaf_h[l] - hl;
                        gain += gl * gl / (hl + lambda) + gr * gr / (hr + lambda);
                    }
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_feature = static_cast<int>(f);
                        best_cut = cut;
                    }
                }
            }
            if (best_feature < 0) break;  // every feature is constant

            const auto& col = feats[best_feature];
            tree.splits.push_back({best_feature, col.thresholds[best_cut]});
            for (std::size_t i = 0; i < n; ++i) {
                if (col.bins[i] > best_cut) leaf_of[i] |= std::size_t{1} << level;
            }
            n_leaves <<= 1;
            model.split_improvements[best_feature] += std::max(0.0, best_gain - parent_score);
        }

        std::vector<double> leaf_g(n_leaves, 0.0), leaf_h(n_leaves, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            leaf_g[leaf_of[i]] += grad[i];
            leaf_h[leaf_of[i]] += hess[i];
        }
        tree.leaf_values.resize(n_leaves);
        for (std::size_t l = 0; l < n_leaves; ++l) {
            tree.leaf_values[l] =
                leaf_h[l] > 0.0 ? -leaf_g[l] / (leaf_h[l] + lambda) * params.learning_rate : 0.0;
        }

        for (std::size_t i = 0; i < n; ++i) scores[i] += tree.leaf_values[leaf_of[i]];
        {
            std::vector<double> probs(n);
            for (std::size_t i = 0; i < n; ++i) probs[i] = sigmoid(scores[i]);
            result.train_curve.push_back(evalrank::logloss(y, probs));
        }
        if (valid) {
            std::vector<double> row(n_feat);
            for (std::size_t i = 0; i < valid->n_rows; ++i) {
                for (std::size_t f = 0; f < n_feat; ++f) row[f] = valid_feats[f][i];
                valid_scores[i] += tree.leaf_values[tree.leaf_for(row)];
            }
            std::vector<double> probs(valid->n_rows);
            for (std::size_t i = 0; i < valid->n_rows; ++i) probs[i] = sigmoid(valid_scores[i]);
            result.valid_curve.push_back(evalrank::logloss(*valid->labels, probs));
        }
        model.trees.push_back(std::move(tree));
    }

    result.model = std::move(model);
    return result;
}

inline GbdtModel fit(const FeatureMatrix& train, const GbdtParams& params) {
    return fit_eval(train, params, nullptr).model;
}

// --- persistence -------------------------------------------------------------

inline json model_to_json(const GbdtModel& model) {
    json j;
    j["version"] = 1;
    j["base_score"] = model.base_score;
    j["prior"] = model.prior;
    j["prior_weight"] = model.prior_weight;
    j["categorical_names"] = model.categorical_names;
    j["continuous_names"] = model.continuous_names;
    j["encoder_provenance"] = model.encoder_provenance;
    j["split_improvements"] = model.split_improvements;
    j["params"] = {{"learning_rate", model.params.learning_rate},
                   {"l2_leaf_reg", model.params.l2_leaf_reg},
                   {"n_trees", model.params.n_trees},
                   {"max_depth", model.params.max_depth},
                   {"n_bins", model.params.n_bins},
                   {"prior_weight", model.params.prior_weight},
                   {"n_permutations", model.params.n_permutations},
                   {"seed", model.params.seed}};
    if (model.params.prior) j["params"]["prior"] = *model.params.prior;

    json tables = json::array();
    for (const auto& table : model.category_tables) {
        std::vector<std::int32_t> ids;
        ids.reserve(table.stats.size());
        for (const auto& [id, _] : table.stats) ids.push_back(id);
        std::sort(ids.begin(), ids.end());
        json rows = json::array();
        for (const auto id : ids) {
            const auto& [sum_y, count] = table.stats.at(id);
            rows.push_back({id, sum_y, count});
        }
        tables.push_back(std::move(rows));
    }
    j["category_tables"] = std::move(tables);

    json trees = json::array();
    for (const auto& tree : model.trees) {
        json splits = json::array();
        for (const auto& s : tree.splits) {
            splits.push_back({{"feature", s.feature}, {"threshold", s.threshold}});
        }
        trees.push_back({{"splits", std::move(splits)}, {"leaf_values", tree.leaf_values}});
    }
    j["trees"] = std::move(trees);
    return j;
}

inline GbdtModel model_from_json(const json& j) {
    if (!j.is_object() || j.value("version", 0) != 1) {
        fail("IoError", "unsupported model document");
    }
    GbdtModel model;
    model.base_score = j.at("base_score").get<double>();
    model.prior = j.at("prior").get<double>();
    model.prior_weight = j.at("prior_weight").get<double>();
    model.categorical_names = j.at("categorical_names").get<std::vector<std::string>>();
    model.continuous_names = j.at("continuous_names").get<std::vector<std::string>>();
    model.encoder_provenance = j.at("encoder_provenance").get<std::string>();
    model.split_improvements = j.at("split_improvements").get<std::vector<double>>();
    const auto& p = j.at("params");
    model.params.learning_rate = p.at("learning_rate").get<double>();
    model.params.l2_leaf_reg = p.at("l2_leaf_reg").get<double>();
    model.params.n_trees = p.at("n_trees").get<int>();
    model.params.max_depth = p.at("max_depth").get<int>();
    model.params.n_bins = p.at("n_bins").get<int>();
    model.params.prior_weight = p.at("prior_weight").get<double>();
    model.params.n_permutations = p.at("n_permutations").get<int>();
    model.params.seed = p.at("seed").get<std::uint64_t>();
    if (p.contains("prior")) model.params.prior = p.at("prior").get<double>();

    for (const auto& rows : j.at("category_tables")) {
        CategoryTable table;
        for (const auto& row : rows) {
            table.stats[row.at(0).get<std::int32_t>()] = {row.at(1).get<double>(),
                                                          row.at(2).get<double>()};
        }
        model.category_tables.push_back(std::move(table));
    }
    for (const auto& tj : j.at("trees")) {
        ObliviousTree tree;
        for (const auto& sj : tj.at("splits")) {
            tree.splits.push_back(
                {sj.at("feature").get<int>(), sj.at("threshold").get<double>()});
        }
        tree.leaf_values = tj.at("leaf_values").get<std::vector<double>>();
        if (tree.leaf_values.size() != std::size_t{1} << tree.splits.size()) {
            fail("IoError", "tree has inconsistent leaf count");
        }
        model.trees.push_back(std::move(tree));
    }
    if (model.category_tables.size() != model.categorical_names.size()) {
        fail("IoError", "model has inconsistent category tables");
    }
    return model;
}

}  // namespace rankforge::gbdt
