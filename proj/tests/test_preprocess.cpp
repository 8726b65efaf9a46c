#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "rankforge/preprocess.hpp"

using namespace rankforge;
using Catch::Matchers::MessageMatches;
using Catch::Matchers::StartsWith;

namespace {

using OptStr = std::optional<std::string>;
using OptReal = std::optional<double>;

dataset::JoinedTable make_table(std::vector<std::pair<std::string, std::vector<OptStr>>> cats,
                                std::vector<std::pair<std::string, std::vector<OptReal>>> conts =
                                    {},
                                std::optional<std::vector<std::uint8_t>> labels = std::nullopt) {
    dataset::JoinedTable t;
    for (auto& [name, col] : cats) {
        t.n_rows = col.size();
        t.categorical_names.push_back(name);
        t.categorical_columns.push_back(std::move(col));
    }
    for (auto& [name, col] : conts) {
        t.n_rows = col.size();
        t.continuous_names.push_back(name);
        t.continuous_columns.push_back(std::move(col));
    }
    t.labels = std::move(labels);
    for (std::size_t i = 0; i < t.n_rows; ++i) {
        t.group_keys.push_back("Q" + std::to_string(i / 6));
        t.product_ids.push_back("P" + std::to_string(i));
    }
    return t;
}

}  // namespace

TEST_CASE("fit_encoder assigns first-appearance ids 1..m", "[preprocess]") {
    const auto t = make_table({{"c", {"x", "y", "x", "z"}}});
    const auto enc = preprocess::fit_encoder(t);
    REQUIRE(enc.columns == std::vector<std::string>{"c"});
    CHECK(enc.value_to_id[0].at("x") == 1);
    CHECK(enc.value_to_id[0].at("y") == 2);
    CHECK(enc.value_to_id[0].at("z") == 3);
    CHECK(enc.cardinality(0) == 3);
}

TEST_CASE("fit_encoder skips missing values", "[preprocess]") {
    const auto t = make_table({{"c", {std::nullopt, std::nullopt}}});
    const auto enc = preprocess::fit_encoder(t);
    CHECK(enc.cardinality(0) == 0);
}

TEST_CASE("fit_encoder scopes maps per column", "[preprocess]") {
    const auto t = make_table({{"c1", {"x", "y"}}, {"c2", {"q", "x"}}});
    const auto enc = preprocess::fit_encoder(t);
    CHECK(enc.value_to_id[0].at("x") == 1);
    CHECK(enc.value_to_id[1].at("x") == 2);  // second appearance in its own column
    CHECK(enc.value_to_id[1].at("q") == 1);
}

TEST_CASE("fit_imputer stores per-column means of present values", "[preprocess]") {
    const auto t = make_table({}, {{"a", {2.0, 4.0, std::nullopt}}, {"b", {5.0, std::nullopt,
                                                                           std::nullopt}}});
    const auto imp = preprocess::fit_imputer(t);
    CHECK(imp.means[0] == 3.0);
    CHECK(imp.means[1] == 5.0);
}

TEST_CASE("fit_imputer rejects an all-missing column", "[preprocess]") {
    const auto t = make_table({}, {{"a", {std::nullopt, std::nullopt}}});
    CHECK_THROWS_MATCHES(preprocess::fit_imputer(t), Error,
                         MessageMatches(StartsWith("AllMissingColumn")));
}

TEST_CASE("transform maps known, unseen, and missing categories", "[preprocess]") {
    const auto train = make_table({{"c", {"x", "y"}}});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);

    const auto test = make_table({{"c", {"y", "q", "x", "q"}}});
    const auto m = preprocess::transform(test, enc, imp);
    CHECK(m.categorical[0] == std::vector<std::int32_t>{2, 3, 1, 3});

    const auto with_missing = make_table({{"c", {"x", std::nullopt}}});
    const auto m2 = preprocess::transform(with_missing, enc, imp);
    CHECK(m2.categorical[0][1] == preprocess::kMissingCategoryId);
}

TEST_CASE("transform imputes continuous gaps with the train mean", "[preprocess]") {
    const auto train = make_table({}, {{"a", {1.0, 3.0}}});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);

    const auto test = make_table({}, {{"a", {1.0, std::nullopt, 3.0}}});
    const auto m = preprocess::transform(test, enc, imp);
    CHECK(m.continuous[0] == std::vector<double>{1.0, 2.0, 3.0});
}

TEST_CASE("transform output has no missing values", "[preprocess]") {
    const auto train = make_table({{"c", {"x", std::nullopt, "y", "x"}}},
                                  {{"a", {1.0, std::nullopt, 2.0, std::nullopt}}},
                                  std::vector<std::uint8_t>{1, 0, 0, 1});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);
    const auto m = preprocess::transform(train, enc, imp);
    REQUIRE(m.n_rows == 4);
    REQUIRE(m.labels.has_value());
    REQUIRE(m.labels->size() == 4);
    for (const auto& col : m.continuous) {
        for (const double v : col) CHECK(std::isfinite(v));
    }
    CHECK(m.groups.size() == 4);
}

TEST_CASE("unseen ids restart from m+1 on every transform", "[preprocess]") {
    const auto train = make_table({{"c", {"x"}}});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);

    const auto t1 = preprocess::transform(make_table({{"c", {"a", "b"}}}), enc, imp);
    const auto t2 = preprocess::transform(make_table({{"c", {"zz"}}}), enc, imp);
    CHECK(t1.categorical[0] == std::vector<std::int32_t>{2, 3});
    CHECK(t2.categorical[0] == std::vector<std::int32_t>{2});
}

TEST_CASE("train ids are stable between train and test transforms", "[preprocess]") {
    const auto train = make_table({{"c", {"x", "y", "z", "y"}}});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);
    const auto mt = preprocess::transform(train, enc, imp);
    const auto mv = preprocess::transform(make_table({{"c", {"z", "x", "y"}}}), enc, imp);
    CHECK(mt.categorical[0] == std::vector<std::int32_t>{1, 2, 3, 2});
    CHECK(mv.categorical[0] == std::vector<std::int32_t>{3, 1, 2});
}

TEST_CASE("fit_encoder is deterministic", "[preprocess]") {
    const auto t = make_table({{"c", {"x", "y", "x", "z"}}}, {{"a", {1.0, 2.0, 3.0, 4.0}}});
    const auto e1 = preprocess::fit_encoder(t);
    const auto e2 = preprocess::fit_encoder(t);
    CHECK(e1.provenance == e2.provenance);
    CHECK(e1.value_to_id[0] == e2.value_to_id[0]);
}

TEST_CASE("transform rejects a mismatched schema", "[preprocess]") {
    const auto train = make_table({{"c", {"x"}}});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);
    CHECK_THROWS_MATCHES(preprocess::transform(make_table({{"other", {"x"}}}), enc, imp), Error,
                         MessageMatches(StartsWith("EncoderMismatch")));
}

TEST_CASE("encoder and imputer round-trip through JSON", "[preprocess]") {
    const auto train = make_table({{"c", {"x", "y", "x", "z"}}, {"d", {"k", std::nullopt, "k",
                                                                       "j"}}},
                                  {{"a", {1.5, std::nullopt, 2.5, 10.0}}});
    const auto enc = preprocess::fit_encoder(train);
    const auto imp = preprocess::fit_imputer(train);

    const auto doc = preprocess::preprocess_to_json(enc, imp);
    const auto [enc2, imp2] = preprocess::preprocess_from_json(doc);
    CHECK(enc2.provenance == enc.provenance);
    CHECK(imp2.provenance == imp.provenance);

    const auto test = make_table({{"c", {"z", "new"}}, {"d", {std::nullopt, "k"}}},
                                 {{"a", {std::nullopt, 4.0}}});
    const auto m1 = preprocess::transform(test, enc, imp);
    const auto m2 = preprocess::transform(test, enc2, imp2);
    CHECK(m1.categorical == m2.categorical);
    CHECK(m1.continuous == m2.continuous);
    CHECK(m1.encoder_provenance == m2.encoder_provenance);
}
