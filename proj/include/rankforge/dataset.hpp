#pragma once

// Impression/product ingestion, the inner join, and the synthetic generator.
//
// Impressions come in groups of exactly six products sharing a query_id; at
// most one column (is_click) carries the binary label. Product attributes are
// joined in by product_id. All files are UTF-8 CSV with a header row; an
// empty field is a missing value.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <utility>
#include <vector>

#include "rankforge/csv.hpp"
#include "rankforge/errors.hpp"
#include "rankforge/rng.hpp"

namespace rankforge::dataset {

inline constexpr std::array<const char*, 16> kImpressionColumns = {
    "query_id",        "user_id",         "session_id",      "product_id",
    "page_type",       "previous_page_type", "device_category", "device_platform",
    "user_tier",       "user_country",    "context_type",    "context_value",
    "product_price",   "week",            "week_day",        "is_click"};

inline constexpr std::array<const char*, 14> kProductColumns = {
    "product_id",     "gender",         "main_colour",    "second_colour",
    "season",         "collection",     "category_id_l1", "category_id_l2",
    "category_id_l3", "brand_id",       "season_year",    "start_online_date",
    "attribute_values", "material_values"};

inline constexpr std::size_t kGroupSize = 6;  // products per impression

struct ImpressionRow {
    std::string query_id;
    std::optional<std::string> user_id;
    std::optional<std::string> session_id;
    std::string product_id;
    std::optional<std::string> page_type;
    std::optional<std::string> previous_page_type;
    std::optional<std::string> device_category;
    std::optional<std::string> device_platform;
    std::optional<std::string> user_tier;
    std::optional<std::string> user_country;
    std::optional<std::string> context_type;
    std::optional<std::string> context_value;
    std::optional<double> product_price;
    std::optional<double> week;
    std::optional<std::string> week_day;
    std::optional<int> is_click;  // absent in unlabeled/test data
};

struct ProductRow {
    std::string product_id;
    std::optional<std::string> gender;
    std::optional<std::string> main_colour;
    std::optional<std::string> second_colour;
    std::optional<std::string> season;
    std::optional<std::string> collection;
    std::optional<std::string> category_id_l1;
    std::optional<std::string> category_id_l2;
    std::optional<std::string> category_id_l3;
    std::optional<std::string> brand_id;
    std::optional<std::string> season_year;
    std::optional<double> start_online_date;  // days online, kept continuous
    std::optional<std::string> attribute_values;  // opaque comma-separated list
    std::optional<std::string> material_values;   // opaque comma-separated list
};

enum class ColumnKind { categorical, continuous, label, group_key };

// Column-major join result. Categorical cells stay raw strings until encoding;
// continuous cells are parsed reals. Row count always equals the impression
// row count.
struct JoinedTable {
    std::size_t n_rows = 0;
    std::vector<std::string> group_keys;   // query_id per row
    std::vector<std::string> product_ids;  // per row, kept for ranking output
    std::vector<std::string> categorical_names;
    std::vector<std::vector<std::optional<std::string>>> categorical_columns;  // [col][row]
    std::vector<std::string> continuous_names;
    std::vector<std::vector<std::optional<double>>> continuous_columns;  // [col][row]
    std::optional<std::vector<std::uint8_t>> labels;

    std::vector<std::pair<std::string, ColumnKind>> column_kinds() const {
        std::vector<std::pair<std::string, ColumnKind>> kinds;
        kinds.emplace_back("query_id", ColumnKind::group_key);
        for (const auto& n : categorical_names) kinds.emplace_back(n, ColumnKind::categorical);
        for (const auto& n : continuous_names) kinds.emplace_back(n, ColumnKind::continuous);
        if (labels) kinds.emplace_back("is_click", ColumnKind::label);
        return kinds;
    }
};

namespace detail {

inline std::optional<std::string> opt_field(const std::string& s) {
    if (s.empty()) return std::nullopt;
    return s;
}

inline std::optional<double> opt_real(const std::string& s, const char* column, std::size_t line) {
    if (s.empty()) return std::nullopt;
    double v = 0.0;
    if (!csv::parse_double(s, v)) {
        fail("MalformedRow", std::string("line ") + std::to_string(line) + ": field '" + column +
                                 "' is not a number: '" + s + "'");
    }
    return v;
}

template <std::size_t N>
inline void check_header(const std::vector<std::string>& header,
                         const std::array<const char*, N>& expected, std::size_t required) {
    if (header.size() < required || header.size() > N) {
        fail("UnknownColumn", "header has " + std::to_string(header.size()) +
                                  " columns, expected " + std::to_string(required) +
                                  (required == N ? "" : " or " + std::to_string(N)));
    }
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] != expected[i]) {
            fail("UnknownColumn", "column " + std::to_string(i + 1) + " is '" + header[i] +
                                      "', expected '" + expected[i] + "'");
        }
    }
}

inline void check_group_sizes(const std::vector<ImpressionRow>& rows) {
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& r : rows) ++counts[r.query_id];
    for (const auto& [qid, c] : counts) {
        if (c != kGroupSize) {
            fail("GroupSizeError", "query_id '" + qid + "' has " + std::to_string(c) +
                                       " rows, expected " + std::to_string(kGroupSize));
        }
    }
}

}  // namespace detail

inline std::vector<ImpressionRow> load_impressions(const std::filesystem::path& path) {
    const csv::Table table = csv::read_file(path);
    if (table.header.empty()) {
        fail("UnknownColumn", path.string() + ": missing header row");
    }
    detail::check_header(table.header, kImpressionColumns, kImpressionColumns.size() - 1);
    const bool labeled = table.header.size() == kImpressionColumns.size();

    std::vector<ImpressionRow> rows;
    rows.reserve(table.rows.size());
    for (const auto& rec : table.rows) {
        if (rec.fields.size() != table.header.size()) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, got " +
                                     std::to_string(rec.fields.size()));
        }
        ImpressionRow r;
        const auto& f = rec.fields;
        r.query_id = f[0];
        if (r.query_id.empty()) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": empty query_id");
        }
        r.user_id = detail::opt_field(f[1]);
        r.session_id = detail::opt_field(f[2]);
        r.product_id = f[3];
        if (r.product_id.empty()) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": empty product_id");
        }
        r.page_type = detail::opt_field(f[4]);
        r.previous_page_type = detail::opt_field(f[5]);
        r.device_category = detail::opt_field(f[6]);
        r.device_platform = detail::opt_field(f[7]);
        r.user_tier = detail::opt_field(f[8]);
        r.user_country = detail::opt_field(f[9]);
        r.context_type = detail::opt_field(f[10]);
        r.context_value = detail::opt_field(f[11]);
        r.product_price = detail::opt_real(f[12], "product_price", rec.line);
        r.week = detail::opt_real(f[13], "week", rec.line);
        r.week_day = detail::opt_field(f[14]);
        if (labeled) {
            if (f[15] == "0") r.is_click = 0;
            else if (f[15] == "1") r.is_click = 1;
            else fail("NonBinaryLabel", "line " + std::to_string(rec.line) +
                                            ": is_click must be 0 or 1, got '" + f[15] + "'");
        }
        rows.push_back(std::move(r));
    }
    detail::check_group_sizes(rows);
    return rows;
}

inline std::vector<ProductRow> load_products(const std::filesystem::path& path) {
    const csv::Table table = csv::read_file(path);
    if (table.header.empty()) {
        fail("UnknownColumn", path.string() + ": missing header row");
    }
    detail::check_header(table.header, kProductColumns, kProductColumns.size());

    std::vector<ProductRow> rows;
    rows.reserve(table.rows.size());
    std::unordered_set<std::string> seen;
    for (const auto& rec : table.rows) {
        if (rec.fields.size() != table.header.size()) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": expected " +
                                     std::to_string(table.header.size()) + " fields, got " +
                                     std::to_string(rec.fields.size()));
        }
        ProductRow r;
        const auto& f = rec.fields;
        r.product_id = f[0];
        if (r.product_id.empty()) {
            fail("MalformedRow", "line " + std::to_string(rec.line) + ": empty product_id");
        }
        if (!seen.insert(r.product_id).second) {
            fail("DuplicateProductId", "product_id '" + r.product_id + "' repeated on line " +
                                           std::to_string(rec.line));
        }
        r.gender = detail::opt_field(f[1]);
        r.main_colour = detail::opt_field(f[2]);
        r.second_colour = detail::opt_field(f[3]);
        r.season = detail::opt_field(f[4]);
        r.collection = detail::opt_field(f[5]);
        r.category_id_l1 = detail::opt_field(f[6]);
        r.category_id_l2 = detail::opt_field(f[7]);
        r.category_id_l3 = detail::opt_field(f[8]);
        r.brand_id = detail::opt_field(f[9]);
        r.season_year = detail::opt_field(f[10]);
        r.start_online_date = detail::opt_real(f[11], "start_online_date", rec.line);
        r.attribute_values = detail::opt_field(f[12]);
        r.material_values = detail::opt_field(f[13]);
        rows.push_back(std::move(r));
    }
    return rows;
}

inline void write_impressions(const std::vector<ImpressionRow>& rows,
                              const std::filesystem::path& path, bool with_label = true) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write " + path.string());
    std::vector<std::string> header(kImpressionColumns.begin(), kImpressionColumns.end());
    if (!with_label) header.pop_back();
    csv::write_row(out, header);
    auto s = [](const std::optional<std::string>& v) { return v.value_or(""); };
    auto d = [](const std::optional<double>& v) {
        return v ? csv::format_double(*v) : std::string();
    };
    for (const auto& r : rows) {
        std::vector<std::string> f = {r.query_id,
                                      s(r.user_id),
                                      s(r.session_id),
                                      r.product_id,
                                      s(r.page_type),
                                      s(r.previous_page_type),
                                      s(r.device_category),
                                      s(r.device_platform),
                                      s(r.user_tier),
                                      s(r.user_country),
                                      s(r.context_type),
                                      s(r.context_value),
                                      d(r.product_price),
                                      d(r.week),
                                      s(r.week_day)};
        if (with_label) f.push_back(r.is_click ? std::to_string(*r.is_click) : "");
        csv::write_row(out, f);
    }
}

inline void write_products(const std::vector<ProductRow>& rows,
                           const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write " + path.string());
    csv::write_row(out, {kProductColumns.begin(), kProductColumns.end()});
    auto s = [](const std::optional<std::string>& v) { return v.value_or(""); };
    for (const auto& r : rows) {
        csv::write_row(out, {r.product_id, s(r.gender), s(r.main_colour), s(r.second_colour),
                             s(r.season), s(r.collection), s(r.category_id_l1),
                             s(r.category_id_l2), s(r.category_id_l3), s(r.brand_id),
                             s(r.season_year),
                             r.start_online_date ? csv::format_double(*r.start_online_date)
                                                 : std::string(),
                             s(r.attribute_values), s(r.material_values)});
    }
}

inline JoinedTable join(const std::vector<ImpressionRow>& impressions,
                        const std::vector<ProductRow>& products) {
    std::unordered_map<std::string, const ProductRow*> index;
    index.reserve(products.size());
    for (const auto& p : products) {
        if (!index.emplace(p.product_id, &p).second) {
            fail("DuplicateProductId", "product_id '" + p.product_id + "' repeated");
        }
    }

    JoinedTable t;
    t.n_rows = impressions.size();
    t.categorical_names = {"user_id",        "session_id",     "product_id",
                           "page_type",      "previous_page_type", "device_category",
                           "device_platform", "user_tier",     "user_country",
                           "context_type",   "context_value",  "week_day",
                           "gender",         "main_colour",    "second_colour",
                           "season",         "collection",     "category_id_l1",
                           "category_id_l2", "category_id_l3", "brand_id",
                           "season_year",    "attribute_values", "material_values"};
    t.continuous_names = {"product_price", "week", "start_online_date"};
    t.categorical_columns.resize(t.categorical_names.size());
    t.continuous_columns.resize(t.continuous_names.size());
    for (auto& c : t.categorical_columns) c.reserve(t.n_rows);
    for (auto& c : t.continuous_columns) c.reserve(t.n_rows);

    const bool labeled = !impressions.empty() && impressions.front().is_click.has_value();
    if (labeled) t.labels.emplace();

    for (const auto& imp : impressions) {
        auto it = index.find(imp.product_id);
        if (it == index.end()) {
            fail("MissingProduct",
                 "impression references unknown product_id '" + imp.product_id + "'");
        }
        const ProductRow& prod = *it->second;
        t.group_keys.push_back(imp.query_id);
        t.product_ids.push_back(imp.product_id);
        std::size_t c = 0;
        t.categorical_columns[c++].push_back(imp.user_id);
        t.categorical_columns[c++].push_back(imp.session_id);
        t.categorical_columns[c++].push_back(imp.product_id);
        t.categorical_columns[c++].push_back(imp.page_type);
        t.categorical_columns[c++].push_back(imp.previous_page_type);
        t.categorical_columns[c++].push_back(imp.device_category);
        t.categorical_columns[c++].push_back(imp.device_platform);
        t.categorical_columns[c++].push_back(imp.user_tier);
        t.categorical_columns[c++].push_back(imp.user_country);
        t.categorical_columns[c++].push_back(imp.context_type);
        t.categorical_columns[c++].push_back(imp.context_value);
        t.categorical_columns[c++].push_back(imp.week_day);
        t.categorical_columns[c++].push_back(prod.gender);
        t.categorical_columns[c++].push_back(prod.main_colour);
        t.categorical_columns[c++].push_back(prod.second_colour);
        t.categorical_columns[c++].push_back(prod.season);
        t.categorical_columns[c++].push_back(prod.collection);
        t.categorical_columns[c++].push_back(prod.category_id_l1);
        t.categorical_columns[c++].push_back(prod.category_id_l2);
        t.categorical_columns[c++].push_back(prod.category_id_l3);
        t.categorical_columns[c++].push_back(prod.brand_id);
        t.categorical_columns[c++].push_back(prod.season_year);
        t.categorical_columns[c++].push_back(prod.attribute_values);
        t.categorical_columns[c++].push_back(prod.material_values);
        t.continuous_columns[0].push_back(imp.product_price);
        t.continuous_columns[1].push_back(imp.week);
        t.continuous_columns[2].push_back(prod.start_online_date);
        if (labeled) {
            if (!imp.is_click) {
                fail("NonBinaryLabel", "query_id '" + imp.query_id +
                                           "': label missing in a labeled dataset");
            }
            t.labels->push_back(static_cast<std::uint8_t>(*imp.is_click));
        }
    }
    return t;
}

// --- synthetic data ---------------------------------------------------------

// Stateless per-category weight in [0,1), reproducible from the seed alone.
inline double planted_weight(std::uint64_t seed, std::string_view tag, std::string_view value) {
    std::uint64_t h = fnv1a64(tag, mix64(seed));
    h = fnv1a64(value, h);
    return static_cast<double>(mix64(h) >> 11) * 0x1.0p-53;
}

// Hidden linear score the generator plants clicks on. The user_country term is
// constant within a query, so the within-query argmax depends on the product
// alone; it is still included so the score matches its declared inputs.
inline double planted_score(const ImpressionRow& imp, const ProductRow& prod,
                            std::uint64_t seed) {
    const std::string missing = "\x01missing";
    double s = planted_weight(seed, "user_country", imp.user_country.value_or(missing));
    s += planted_weight(seed, "brand_id", prod.brand_id.value_or(missing));
    s += planted_weight(seed, "category_id_l1", prod.category_id_l1.value_or(missing));
    s += imp.product_price.value_or(0.5);
    return s;
}

// n_queries groups of six distinct products, exactly one click per group. The
// click lands on the planted-score argmax with probability signal_strength,
// uniformly otherwise. missing_rate blanks optional cells, except the four
// columns the planted score reads.
inline std::pair<std::vector<ImpressionRow>, std::vector<ProductRow>> generate_synthetic(
    std::size_t n_queries, std::size_t n_users, std::size_t n_products, double signal_strength,
    std::uint64_t seed, double missing_rate = 0.01) {
    if (n_products < kGroupSize) {
        fail("TooFewProducts", "need at least " + std::to_string(kGroupSize) +
                                   " products, got " + std::to_string(n_products));
    }
    if (n_users == 0) fail("TooFewProducts", "need at least one user");
    if (signal_strength < 0.0 || signal_strength > 1.0) {
        fail("InvalidParams", "signal_strength must be in [0,1]");
    }
    if (missing_rate < 0.0 || missing_rate >= 1.0) {
        fail("InvalidParams", "missing_rate must be in [0,1)");
    }

    Rng rng(seed);
    auto pick = [&](const char* prefix, std::size_t n) {
        return std::string(prefix) + std::to_string(rng.below(n));
    };

    std::vector<ProductRow> products;
    products.reserve(n_products);
    std::vector<double> prices(n_products);
    for (std::size_t i = 0; i < n_products; ++i) {
        ProductRow p;
        p.product_id = "P" + std::to_string(i);
        p.gender = pick("g", 3);
        p.main_colour = pick("col", 12);
        p.second_colour = pick("col", 12);
        p.season = pick("season", 6);
        p.collection = pick("coll", 30);
        p.category_id_l1 = pick("c1_", 6);
        p.category_id_l2 = pick("c2_", 18);
        p.category_id_l3 = pick("c3_", 40);
        p.brand_id = pick("b", 18);
        p.season_year = pick("y", 5);
        p.start_online_date = static_cast<double>(rng.below(1500));
        p.attribute_values = pick("a", 40) + "," + pick("a", 40);
        p.material_values = pick("m", 15);
        prices[i] = rng.uniform01();
        products.push_back(std::move(p));
    }

    std::vector<std::string> countries(n_users);
    std::vector<std::string> tiers(n_users);
    for (std::size_t u = 0; u < n_users; ++u) {
        countries[u] = pick("ctry", 12);
        tiers[u] = pick("tier", 4);
    }

    std::vector<ImpressionRow> impressions;
    impressions.reserve(n_queries * kGroupSize);
    std::vector<std::size_t> chosen;
    for (std::size_t q = 0; q < n_queries; ++q) {
        const std::size_t user = rng.below(n_users);
        const std::string query_id = "Q" + std::to_string(q);
        const std::string user_id = "U" + std::to_string(user);
        const std::string session_id = "S" + std::to_string(user) + "_" +
                                       std::to_string(rng.below(4));
        const std::string page_type = pick("page", 5);
        const std::string prev_page = pick("page", 8);
        const std::string device_cat = pick("dev", 3);
        const std::string platform = pick("plat", 4);
        const std::string context_type = pick("ctxt", 4);
        const std::string context_value = "ctx" + std::to_string(rng.below(2 * n_users));
        const double week = static_cast<double>(rng.below(9)) / 8.0;
        const std::string week_day = pick("day", 7);

        // six distinct products
        chosen.clear();
        while (chosen.size() < kGroupSize) {
            const std::size_t p = rng.below(n_products);
            bool dup = false;
            for (std::size_t c : chosen) dup = dup || (c == p);
            if (!dup) chosen.push_back(p);
        }

        std::vector<ImpressionRow> group;
        group.reserve(kGroupSize);
        for (std::size_t p : chosen) {
            ImpressionRow r;
            r.query_id = query_id;
            r.user_id = user_id;
            r.session_id = session_id;
            r.product_id = products[p].product_id;
            r.page_type = page_type;
            r.previous_page_type = prev_page;
            r.device_category = device_cat;
            r.device_platform = platform;
            r.user_tier = tiers[user];
            r.user_country = countries[user];
            r.context_type = context_type;
            r.context_value = context_value;
            r.product_price = prices[p];
            r.week = week;
            r.week_day = week_day;
            r.is_click = 0;
            group.push_back(std::move(r));
        }

        std::size_t clicked = rng.below(kGroupSize);
        const bool use_signal = rng.uniform01() < signal_strength;
        if (use_signal) {
            double best = -1.0;
            for (std::size_t i = 0; i < kGroupSize; ++i) {
                const double s = planted_score(group[i], products[chosen[i]], seed);
                if (s > best) {
                    best = s;
                    clicked = i;
                }
            }
        }
        group[clicked].is_click = 1;

        if (missing_rate > 0.0) {
            for (auto& r : group) {
                auto blank = [&](std::optional<std::string>& v) {
                    if (rng.uniform01() < missing_rate) v.reset();
                };
                blank(r.user_id);
                blank(r.session_id);
                blank(r.page_type);
                blank(r.previous_page_type);
                blank(r.device_category);
                blank(r.device_platform);
                blank(r.user_tier);
                blank(r.context_type);
                blank(r.context_value);
                blank(r.week_day);
                if (rng.uniform01() < missing_rate) r.week.reset();
                // user_country and product_price stay: the planted score reads them
            }
        }
        for (auto& r : group) impressions.push_back(std::move(r));
    }

    if (missing_rate > 0.0) {
        for (auto& p : products) {
            auto blank = [&](std::optional<std::string>& v) {
                if (rng.uniform01() < missing_rate) v.reset();
            };
            blank(p.gender);
            blank(p.main_colour);
            blank(p.second_colour);
            blank(p.season);
            blank(p.collection);
            blank(p.category_id_l2);
            blank(p.category_id_l3);
            blank(p.season_year);
            blank(p.attribute_values);
            blank(p.material_values);
            if (rng.uniform01() < missing_rate) p.start_online_date.reset();
            // brand_id and category_id_l1 stay: the planted score reads them
        }
    }
    return {std::move(impressions), std::move(products)};
}

}  // namespace rankforge::dataset
