#pragma once

// Ranking and metrics: per-query orderings of six products by click
// probability, mean logloss, and Mean Reciprocal Rank. Only relative
// probabilities matter for the ranking, so any strictly increasing transform
// of the scores leaves it unchanged.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankforge/csv.hpp"
#include "rankforge/errors.hpp"

namespace rankforge::evalrank {

using json = nlohmann::json;

inline constexpr double kProbEps = 1e-15;
inline constexpr std::size_t kGroupSize = 6;

struct ScoredRow {
    std::string query_id;
    std::string product_id;
    double probability = 0.0;
};

struct RankedProduct {
    std::string product_id;
    double probability = 0.0;
    int rank = 0;  // 1..6, descending probability
};

struct QueryRanking {
    std::string query_id;
    std::vector<RankedProduct> products;  // rank order
};

struct MetricReport {
    std::optional<double> mean_logloss;  // absent when probabilities are unavailable
    double mrr = 0.0;
    std::size_t n_queries = 0;
    std::size_t n_rows = 0;

    json to_json() const {
        json j;
        if (mean_logloss) j["mean_logloss"] = *mean_logloss;
        j["mrr"] = mrr;
        j["n_queries"] = n_queries;
        j["n_rows"] = n_rows;
        return j;
    }
};

enum class ZeroClickPolicy { count_as_zero, exclude };

// (query_id, product_id) -> binary label
class LabelMap {
public:
    void add(const std::string& query_id, const std::string& product_id, int label) {
        map_[query_id + '\x1f' + product_id] = label;
    }
    std::optional<int> get(const std::string& query_id, const std::string& product_id) const {
        auto it = map_.find(query_id + '\x1f' + product_id);
        if (it == map_.end()) return std::nullopt;
        return it->second;
    }
    std::size_t size() const { return map_.size(); }

private:
    std::unordered_map<std::string, int> map_;
};

// mean binary cross-entropy, probabilities clipped to [eps, 1-eps]
inline double logloss(std::span<const std::uint8_t> y, std::span<const double> p) {
    if (y.size() != p.size()) {
        fail("LengthMismatch", "labels (" + std::to_string(y.size()) + ") vs probabilities (" +
                                   std::to_string(p.size()) + ")");
    }
    if (y.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double pc = std::clamp(p[i], kProbEps, 1.0 - kProbEps);
        sum += y[i] ? -std::log(pc) : -std::log(1.0 - pc);
    }
    return sum / static_cast<double>(y.size());
}

// Groups rows by query_id (first-appearance order) and sorts each group by
// descending probability; ties keep input order. Every query must have
// exactly six rows.
inline std::vector<QueryRanking> rank_queries(const std::vector<ScoredRow>& rows) {
    std::vector<QueryRanking> rankings;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& row : rows) {
        auto [it, inserted] = index.emplace(row.query_id, rankings.size());
        if (inserted) rankings.push_back({row.query_id, {}});
        rankings[it->second].products.push_back({row.product_id, row.probability, 0});
    }
    for (auto& r : rankings) {
        if (r.products.size() != kGroupSize) {
            fail("GroupSizeError", "query_id '" + r.query_id + "' has " +
                                       std::to_string(r.products.size()) + " rows, expected " +
                                       std::to_string(kGroupSize));
        }
        std::stable_sort(r.products.begin(), r.products.end(),
                         [](const RankedProduct& a, const RankedProduct& b) {
                             return a.probability > b.probability;
                         });
        for (std::size_t i = 0; i < r.products.size(); ++i) {
            r.products[i].rank = static_cast<int>(i) + 1;
        }
    }
    return rankings;
}

// Mean over queries of 1/rank of the best-ranked clicked product. Queries
// without any clicked product contribute 0 or are dropped, per policy.
inline double mrr(const std::vector<QueryRanking>& rankings, const LabelMap& labels,
                  ZeroClickPolicy policy = ZeroClickPolicy::count_as_zero) {
    double sum = 0.0;
    std::size_t counted = 0;
    for (const auto& r : rankings) {
        int best_rank = 0;
        for (const auto& p : r.products) {
            const auto label = labels.get(r.query_id, p.product_id);
            if (!label) {
                fail("MissingLabel",
                     "no label for query_id '" + r.query_id + "', product_id '" + p.product_id + "'");
            }
            if (*label == 1) {
                best_rank = p.rank;  // products are in rank order
                break;
            }
        }
        if (best_rank > 0) {
            sum += 1.0 / best_rank;
            ++counted;
        } else if (policy == ZeroClickPolicy::count_as_zero) {
            ++counted;
        }
    }
    return counted ? sum / static_cast<double>(counted) : 0.0;
}

// Row-level convenience used by the CV loop: products are identified by row
// position, labels ride in a vector.
inline MetricReport report_rows(std::span<const std::string> groups,
                                std::span<const std::uint8_t> labels,
                                std::span<const double> probs,
                                ZeroClickPolicy policy = ZeroClickPolicy::count_as_zero) {
    if (groups.size() != labels.size() || groups.size() != probs.size()) {
        fail("LengthMismatch", "groups/labels/probabilities sizes differ");
    }
    std::vector<ScoredRow> rows;
    rows.reserve(groups.size());
    LabelMap map;
    for (std::size_t i = 0; i < groups.size(); ++i) {
        std::string pid = std::to_string(i);
        map.add(groups[i], pid, labels[i]);
        rows.push_back({groups[i], std::move(pid), probs[i]});
    }
    const auto rankings = rank_queries(rows);
    MetricReport report;
    report.mean_logloss = logloss(labels, probs);
    report.mrr = mrr(rankings, map, policy);
    report.n_queries = rankings.size();
    report.n_rows = groups.size();
    return report;
}

inline double mrr_rows(std::span<const std::string> groups, std::span<const std::uint8_t> labels,
                       std::span<const double> probs,
                       ZeroClickPolicy policy = ZeroClickPolicy::count_as_zero) {
    return report_rows(groups, labels, probs, policy).mrr;
}

// --- submissions -------------------------------------------------------------

inline void write_submission(const std::vector<QueryRanking>& rankings,
                             const std::filesystem::path& path,
                             bool with_probability = false) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write " + path.string());
    std::vector<std::string> header = {"query_id", "product_id", "rank"};
    if (with_probability) header.push_back("probability");
    csv::write_row(out, header);
    for (const auto& r : rankings) {
        for (const auto& p : r.products) {
            std::vector<std::string> fields = {r.query_id, p.product_id, std::to_string(p.rank)};
            if (with_probability) fields.push_back(csv::format_double(p.probability));
            csv::write_row(out, fields);
        }
    }
}

inline std::vector<QueryRanking> read_submission(const std::filesystem::path& path,
                                                 bool* has_probability = nullptr) {
    const csv::Table table = csv::read_file(path);
    const bool with_prob = table.header.size() == 4 && table.header[3] == "probability";
    if (!(table.header.size() == 3 || with_prob) || table.header[0] != "query_id" ||
        table.header[1] != "product_id" || table.header[2] != "rank") {
        fail("UnknownColumn", path.string() + ": expected header query_id,product_id,rank");
    }
    if (has_probability) *has_probability = with_prob;

    std::vector<QueryRanking> rankings;
    std::unordered_map<std::string, std::size_t> index;
    for (const auto& rec : table.rows) {
        if (rec.fields.size() != table.header.size()) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": wrong field count");
        }
        double rank = 0.0;
        if (!csv::parse_double(rec.fields[2], rank) || rank < 1 || rank > 6 ||
            rank != static_cast<int>(rank)) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": bad rank '" +
                                     rec.fields[2] + "'");
        }
        double prob = 0.0;
        if (with_prob && !csv::parse_double(rec.fields[3], prob)) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": bad probability");
        }
        auto [it, inserted] = index.emplace(rec.fields[0], rankings.size());
        if (inserted) rankings.push_back({rec.fields[0], {}});
        rankings[it->second].products.push_back(
            {rec.fields[1], prob, static_cast<int>(rank)});
    }
    for (auto& r : rankings) {
        if (r.products.size() != kGroupSize) {
            fail("GroupSizeError", "query_id '" + r.query_id + "' has " +
                                       std::to_string(r.products.size()) + " rows");
        }
        std::stable_sort(r.products.begin(), r.products.end(),
                         [](const RankedProduct& a, const RankedProduct& b) {
                             return a.rank < b.rank;
                         });
        for (std::size_t i = 0; i < r.products.size(); ++i) {
            if (r.products[i].rank != static_cast<int>(i) + 1) {
                fail("MalformedRow", "query_id '" + r.query_id +
                                         "': ranks are not a permutation of 1..6");
            }
        }
    }
    return rankings;
}

}  // namespace rankforge::evalrank
