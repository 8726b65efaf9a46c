#pragma once

// Label encoding and imputation with train-fit/test-apply semantics.
//
// Each categorical column gets its own dense id map {value -> 1..m} in order
// of first appearance. At transform time, values unseen during the fit extend
// the ids past m (fresh ids per call, first-appearance order), missing
// categoricals become the -999 sentinel, and missing continuous cells take the
// training mean.

#include <bit>
#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankforge/dataset.hpp"
#include "rankforge/errors.hpp"
#include "rankforge/rng.hpp"

namespace rankforge::preprocess {

using json = nlohmann::json;

inline constexpr std::int32_t kMissingCategoryId = -999;

struct LabelEncoder {
    std::vector<std::string> columns;
    std::vector<std::unordered_map<std::string, std::int32_t>> value_to_id;
    std::vector<std::vector<std::string>> id_to_value;  // index i holds the value with id i+1
    std::string provenance;

    std::int32_t cardinality(std::size_t col) const {
        return static_cast<std::int32_t>(id_to_value[col].size());
    }
};

struct Imputer {
    std::vector<std::string> columns;
    std::vector<double> means;
    std::string provenance;
};

// Encoded table: integer ids for categoricals, reals for continuous, no
// missing values. groups/product_ids ride along for ranking and CV splits.
struct FeatureMatrix {
    std::size_t n_rows = 0;
    std::vector<std::string> categorical_names;
    std::vector<std::vector<std::int32_t>> categorical;  // [col][row]
    std::vector<std::string> continuous_names;
    std::vector<std::vector<double>> continuous;  // [col][row]
    std::optional<std::vector<std::uint8_t>> labels;
    std::vector<std::string> groups;
    std::vector<std::string> product_ids;
    std::string encoder_provenance;

    FeatureMatrix select_rows(const std::vector<std::size_t>& rows) const {
        FeatureMatrix out;
        out.n_rows = rows.size();
        out.categorical_names = categorical_names;
        out.continuous_names = continuous_names;
        out.encoder_provenance = encoder_provenance;
        out.categorical.resize(categorical.size());
        for (std::size_t c = 0; c < categorical.size(); ++c) {
            out.categorical[c].reserve(rows.size());
            for (std::size_t r : rows) out.categorical[c].push_back(categorical[c][r]);
        }
        out.continuous.resize(continuous.size());
        for (std::size_t c = 0; c < continuous.size(); ++c) {
            out.continuous[c].reserve(rows.size());
            for (std::size_t r : rows) out.continuous[c].push_back(continuous[c][r]);
        }
        if (labels) {
            out.labels.emplace();
            out.labels->reserve(rows.size());
            for (std::size_t r : rows) out.labels->push_back((*labels)[r]);
        }
        if (!groups.empty()) {
            out.groups.reserve(rows.size());
            for (std::size_t r : rows) out.groups.push_back(groups[r]);
        }
        if (!product_ids.empty()) {
            out.product_ids.reserve(rows.size());
            for (std::size_t r : rows) out.product_ids.push_back(product_ids[r]);
        }
        return out;
    }
};

namespace detail {

inline std::string hash_hex(std::uint64_t h) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[h & 0xf];
        h >>= 4;
    }
    return s;
}

inline std::string encoder_hash(const LabelEncoder& enc) {
    std::uint64_t h = fnv1a64("label-encoder");
    for (std::size_t c = 0; c < enc.columns.size(); ++c) {
        h = fnv1a64(enc.columns[c], h);
        h = fnv1a64("\x1f", h);
        for (const auto& v : enc.id_to_value[c]) {
            h = fnv1a64(v, h);
            h = fnv1a64("\x1e", h);
        }
    }
    return hash_hex(h);
}

inline std::string imputer_hash(const Imputer& imp) {
    std::uint64_t h = fnv1a64("imputer");
    for (std::size_t c = 0; c < imp.columns.size(); ++c) {
        h = fnv1a64(imp.columns[c], h);
        const auto bits = std::bit_cast<std::uint64_t>(imp.means[c]);
        h = fnv1a64(hash_hex(bits), h);
    }
    return hash_hex(h);
}

}  // namespace detail

inline LabelEncoder fit_encoder(const dataset::JoinedTable& table) {
    LabelEncoder enc;
    enc.columns = table.categorical_names;
    enc.value_to_id.resize(enc.columns.size());
    enc.id_to_value.resize(enc.columns.size());
    for (std::size_t c = 0; c < enc.columns.size(); ++c) {
        auto& map = enc.value_to_id[c];
        auto& inv = enc.id_to_value[c];
        for (const auto& cell : table.categorical_columns[c]) {
            if (!cell) continue;  // missing values never enter the map
            auto [it, inserted] = map.emplace(*cell, static_cast<std::int32_t>(inv.size()) + 1);
            if (inserted) inv.push_back(*cell);
        }
    }
    enc.provenance = detail::encoder_hash(enc);
    return enc;
}

inline Imputer fit_imputer(const dataset::JoinedTable& table) {
    Imputer imp;
    imp.columns = table.continuous_names;
    imp.means.reserve(imp.columns.size());
    for (std::size_t c = 0; c < imp.columns.size(); ++c) {
        double sum = 0.0;
        std::size_t count = 0;
        for (const auto& cell : table.continuous_columns[c]) {
            if (!cell) continue;
            sum += *cell;
            ++count;
        }
        if (count == 0) {
            fail("AllMissingColumn",
                 "continuous column '" + imp.columns[c] + "' has no non-missing values");
        }
        imp.means.push_back(sum / static_cast<double>(count));
    }
    imp.provenance = detail::imputer_hash(imp);
    return imp;
}

inline FeatureMatrix transform(const dataset::JoinedTable& table, const LabelEncoder& enc,
                               const Imputer& imp) {
    if (enc.columns != table.categorical_names || imp.columns != table.continuous_names) {
        fail("EncoderMismatch", "table schema differs from the fitted encoder/imputer");
    }
    FeatureMatrix m;
    m.n_rows = table.n_rows;
    m.categorical_names = table.categorical_names;
    m.continuous_names = table.continuous_names;
    m.groups = table.group_keys;
    m.product_ids = table.product_ids;
    m.labels = table.labels;
    m.encoder_provenance =
        detail::hash_hex(fnv1a64(enc.provenance + ":" + imp.provenance));

    m.categorical.resize(enc.columns.size());
    for (std::size_t c = 0; c < enc.columns.size(); ++c) {
        auto& out = m.categorical[c];
        out.reserve(table.n_rows);
        const auto& map = enc.value_to_id[c];
        // unseen categories get fresh ids m+1, m+2, ... scoped to this call
        std::unordered_map<std::string, std::int32_t> fresh;
        std::int32_t next_id = enc.cardinality(c);
        for (const auto& cell : table.categorical_columns[c]) {
            if (!cell) {
                out.push_back(kMissingCategoryId);
                continue;
            }
            if (auto it = map.find(*cell); it != map.end()) {
                out.push_back(it->second);
                continue;
            }
            auto [it, inserted] = fresh.emplace(*cell, next_id + 1);
            if (inserted) ++next_id;
            out.push_back(it->second);
        }
    }

    m.continuous.resize(imp.columns.size());
    for (std::size_t c = 0; c < imp.columns.size(); ++c) {
        auto& out = m.continuous[c];
        out.reserve(table.n_rows);
        for (const auto& cell : table.continuous_columns[c]) {
            out.push_back(cell.value_or(imp.means[c]));
        }
    }
    return m;
}

// --- persistence -------------------------------------------------------------

inline json preprocess_to_json(const LabelEncoder& enc, const Imputer& imp) {
    json doc;
    doc["version"] = 1;
    json cols = json::array();
    for (std::size_t c = 0; c < enc.columns.size(); ++c) {
        cols.push_back({{"name", enc.columns[c]}, {"values", enc.id_to_value[c]}});
    }
    doc["categorical"] = std::move(cols);
    json means = json::array();
    for (std::size_t c = 0; c < imp.columns.size(); ++c) {
        means.push_back({{"name", imp.columns[c]}, {"mean", imp.means[c]}});
    }
    doc["continuous"] = std::move(means);
    return doc;
}

inline std::pair<LabelEncoder, Imputer> preprocess_from_json(const json& doc) {
    if (!doc.contains("version") || doc["version"].get<int>() != 1) {
        fail("IoError", "unsupported encoder document version");
    }
    LabelEncoder enc;
    for (const auto& col : doc.at("categorical")) {
        enc.columns.push_back(col.at("name").get<std::string>());
        auto values = col.at("values").get<std::vector<std::string>>();
        std::unordered_map<std::string, std::int32_t> map;
        for (std::size_t i = 0; i < values.size(); ++i) {
            map.emplace(values[i], static_cast<std::int32_t>(i) + 1);
        }
        enc.value_to_id.push_back(std::move(map));
        enc.id_to_value.push_back(std::move(values));
    }
    enc.provenance = detail::encoder_hash(enc);
    Imputer imp;
    for (const auto& col : doc.at("continuous")) {
        imp.columns.push_back(col.at("name").get<std::string>());
        imp.means.push_back(col.at("mean").get<double>());
    }
    imp.provenance = detail::imputer_hash(imp);
    return {std::move(enc), std::move(imp)};
}

}  // namespace rankforge::preprocess
