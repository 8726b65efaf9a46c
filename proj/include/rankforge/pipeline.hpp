#pragma once

// Command layer: a JSON run config plus the six workflow commands
// (generate, train, tune, predict, evaluate, plot) and their run-directory
// artifacts. Commands print a single JSON summary line on stdout.

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rankforge/dataset.hpp"
#include "rankforge/errors.hpp"
#include "rankforge/evalrank.hpp"
#include "rankforge/gbdt.hpp"
#include "rankforge/preprocess.hpp"
#include "rankforge/rng.hpp"
#include "rankforge/tpe.hpp"
#include "rankforge/trainer.hpp"

namespace rankforge::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct GenerateConfig {
    std::size_t n_queries = 1000;
    std::size_t n_users = 300;
    std::size_t n_products = 60;
    double signal_strength = 0.7;
    double missing_rate = 0.01;
};

struct RunConfig {
    fs::path impressions = "impressions.csv";
    fs::path products = "products.csv";
    fs::path out_dir = "run";
    fs::path model_dir;   // empty -> out_dir
    fs::path submission;  // empty -> out_dir/submission.csv
    std::uint64_t seed = 42;
    int k_folds = 5;
    bool exclude_unclicked = false;
    std::size_t n_trials = 25;
    GenerateConfig generate;
    gbdt::GbdtParams gbdt;
    tpe::TpeConfig tpe;
    tpe::SearchSpace space;

    evalrank::ZeroClickPolicy policy() const {
        return exclude_unclicked ? evalrank::ZeroClickPolicy::exclude
                                 : evalrank::ZeroClickPolicy::count_as_zero;
    }
    fs::path model_dir_or_default() const { return model_dir.empty() ? out_dir : model_dir; }
    fs::path submission_or_default() const {
        return submission.empty() ? out_dir / "submission.csv" : submission;
    }
};

inline tpe::SearchSpace default_space() {
    tpe::SearchSpace space;
    space.dims.emplace_back("learning_rate", tpe::Uniform{1e-3, 5e-1});
    space.dims.emplace_back("l2_leaf_reg", tpe::QLogUniform{0.0, 2.0, 1.0});
    return space;
}

namespace detail {

inline std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot read " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

inline void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write " + path.string());
    out << text;
}

inline json read_json(const fs::path& path) {
    const auto text = read_text(path);
    json doc = json::parse(text, nullptr, false);
    if (doc.is_discarded()) fail("IoError", path.string() + ": not valid JSON");
    return doc;
}

inline void check_keys(const json& obj, std::initializer_list<const char*> allowed,
                       const std::string& where) {
    for (const auto& [key, _] : obj.items()) {
        bool known = false;
        for (const char* a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) fail("InvalidParams", "unknown config key '" + key + "' in " + where);
    }
}

inline std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

}  // namespace detail

inline json space_to_json(const tpe::SearchSpace& space) {
    json arr = json::array();
    for (const auto& [name, dim] : space.dims) {
        json d;
        d["name"] = name;
        if (const auto* ud = std::get_if<tpe::Uniform>(&dim)) {
            d["type"] = "uniform";
            d["low"] = ud->low;
            d["high"] = ud->high;
        } else {
            const auto& qd = std::get<tpe::QLogUniform>(dim);
            d["type"] = "qloguniform";
            d["low"] = qd.low;
            d["high"] = qd.high;
            d["q"] = qd.q;
        }
        arr.push_back(std::move(d));
    }
    return arr;
}

inline tpe::SearchSpace space_from_json(const json& arr) {
    if (!arr.is_array()) fail("InvalidParams", "space must be an array of dimensions");
    tpe::SearchSpace space;
    for (const auto& d : arr) {
        detail::check_keys(d, {"name", "type", "low", "high", "q"}, "space");
        const std::string name = d.at("name").get<std::string>();
        const std::string type = d.at("type").get<std::string>();
        if (type == "uniform") {
            space.dims.emplace_back(
                name, tpe::Uniform{d.at("low").get<double>(), d.at("high").get<double>()});
        } else if (type == "qloguniform") {
            space.dims.emplace_back(name,
                                    tpe::QLogUniform{d.at("low").get<double>(),
                                                     d.at("high").get<double>(),
                                                     d.at("q").get<double>()});
        } else {
            fail("InvalidParams", "unknown dimension type '" + type + "'");
        }
    }
    space.validate();
    return space;
}

inline json params_to_json(const gbdt::GbdtParams& params) {
    json j = {{"learning_rate", params.learning_rate},
              {"l2_leaf_reg", params.l2_leaf_reg},
              {"n_trees", params.n_trees},
              {"max_depth", params.max_depth},
              {"n_bins", params.n_bins},
              {"prior_weight", params.prior_weight},
              {"n_permutations", params.n_permutations},
              {"seed", params.seed}};
    if (params.prior) j["prior"] = *params.prior;
    return j;
}

inline json config_to_json(const RunConfig& cfg) {
    json j;
    j["impressions"] = cfg.impressions.string();
    j["products"] = cfg.products.string();
    j["out_dir"] = cfg.out_dir.string();
    if (!cfg.model_dir.empty()) j["model_dir"] = cfg.model_dir.string();
    if (!cfg.submission.empty()) j["submission"] = cfg.submission.string();
    j["seed"] = cfg.seed;
    j["k_folds"] = cfg.k_folds;
    j["exclude_unclicked"] = cfg.exclude_unclicked;
    j["n_trials"] = cfg.n_trials;
    j["generate"] = {{"n_queries", cfg.generate.n_queries},
                     {"n_users", cfg.generate.n_users},
                     {"n_products", cfg.generate.n_products},
                     {"signal_strength", cfg.generate.signal_strength},
                     {"missing_rate", cfg.generate.missing_rate}};
    j["gbdt"] = params_to_json(cfg.gbdt);
    j["tpe"] = {{"n_startup", cfg.tpe.n_startup},
                {"gamma", cfg.tpe.gamma},
                {"n_candidates", cfg.tpe.n_candidates},
                {"seed", cfg.tpe.seed}};
    j["space"] = space_to_json(cfg.space);
    return j;
}

// Partial configs are fine: absent keys keep defaults. The gbdt and tpe seeds
// derive from the run seed unless set explicitly.
inline RunConfig load_config(const json& doc) {
    if (!doc.is_object()) fail("InvalidParams", "config must be a JSON object");
    detail::check_keys(doc,
                       {"impressions", "products", "out_dir", "model_dir", "submission", "seed",
                        "k_folds", "exclude_unclicked", "n_trials", "generate", "gbdt", "tpe",
                        "space"},
                       "config");
    RunConfig cfg;
    if (doc.contains("impressions")) cfg.impressions = doc.at("impressions").get<std::string>();
    if (doc.contains("products")) cfg.products = doc.at("products").get<std::string>();
    if (doc.contains("out_dir")) cfg.out_dir = doc.at("out_dir").get<std::string>();
    if (doc.contains("model_dir")) cfg.model_dir = doc.at("model_dir").get<std::string>();
    if (doc.contains("submission")) cfg.submission = doc.at("submission").get<std::string>();
    if (doc.contains("seed")) cfg.seed = doc.at("seed").get<std::uint64_t>();
    if (doc.contains("k_folds")) cfg.k_folds = doc.at("k_folds").get<int>();
    if (doc.contains("exclude_unclicked")) {
        cfg.exclude_unclicked = doc.at("exclude_unclicked").get<bool>();
    }
    if (doc.contains("n_trials")) cfg.n_trials = doc.at("n_trials").get<std::size_t>();

    cfg.gbdt.seed = mix64(cfg.seed ^ 0x6bd700000001ull);
    cfg.tpe.seed = mix64(cfg.seed ^ 0x79e500000002ull);
    cfg.space = default_space();

    if (doc.contains("generate")) {
        const auto& g = doc.at("generate");
        detail::check_keys(
            g, {"n_queries", "n_users", "n_products", "signal_strength", "missing_rate"},
            "generate");
        if (g.contains("n_queries")) cfg.generate.n_queries = g.at("n_queries").get<std::size_t>();
        if (g.contains("n_users")) cfg.generate.n_users = g.at("n_users").get<std::size_t>();
        if (g.contains("n_products")) {
            cfg.generate.n_products = g.at("n_products").get<std::size_t>();
        }
        if (g.contains("signal_strength")) {
            cfg.generate.signal_strength = g.at("signal_strength").get<double>();
        }
        if (g.contains("missing_rate")) {
            cfg.generate.missing_rate = g.at("missing_rate").get<double>();
        }
    }
    if (doc.contains("gbdt")) {
        const auto& g = doc.at("gbdt");
        detail::check_keys(g,
                           {"learning_rate", "l2_leaf_reg", "n_trees", "max_depth", "n_bins",
                            "prior_weight", "prior", "n_permutations", "seed"},
                           "gbdt");
        if (g.contains("learning_rate")) cfg.gbdt.learning_rate = g.at("learning_rate").get<double>();
        if (g.contains("l2_leaf_reg")) cfg.gbdt.l2_leaf_reg = g.at("l2_leaf_reg").get<double>();
        if (g.contains("n_trees")) cfg.gbdt.n_trees = g.at("n_trees").get<int>();
        if (g.contains("max_depth")) cfg.gbdt.max_depth = g.at("max_depth").get<int>();
        if (g.contains("n_bins")) cfg.gbdt.n_bins = g.at("n_bins").get<int>();
        if (g.contains("prior_weight")) cfg.gbdt.prior_weight = g.at("prior_weight").get<double>();
        if (g.contains("prior")) cfg.gbdt.prior = g.at("prior").get<double>();
        if (g.contains("n_permutations")) {
            cfg.gbdt.n_permutations = g.at("n_permutations").get<int>();
        }
        if (g.contains("seed")) cfg.gbdt.seed = g.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("tpe")) {
        const auto& t = doc.at("tpe");
        detail::check_keys(t, {"n_startup", "gamma", "n_candidates", "seed"}, "tpe");
        if (t.contains("n_startup")) cfg.tpe.n_startup = t.at("n_startup").get<int>();
        if (t.contains("gamma")) cfg.tpe.gamma = t.at("gamma").get<double>();
        if (t.contains("n_candidates")) cfg.tpe.n_candidates = t.at("n_candidates").get<int>();
        if (t.contains("seed")) cfg.tpe.seed = t.at("seed").get<std::uint64_t>();
    }
    if (doc.contains("space")) cfg.space = space_from_json(doc.at("space"));
    return cfg;
}

inline RunConfig load_config_file(const fs::path& path) {
    return load_config(detail::read_json(path));
}

// --- commands ----------------------------------------------------------------

inline json cmd_generate(const RunConfig& cfg) {
    const auto [impressions, products] = dataset::generate_synthetic(
        cfg.generate.n_queries, cfg.generate.n_users, cfg.generate.n_products,
        cfg.generate.signal_strength, cfg.seed, cfg.generate.missing_rate);
    if (cfg.impressions.has_parent_path()) fs::create_directories(cfg.impressions.parent_path());
    if (cfg.products.has_parent_path()) fs::create_directories(cfg.products.parent_path());
    dataset::write_impressions(impressions, cfg.impressions);
    dataset::write_products(products, cfg.products);
    json summary = {{"impressions", cfg.impressions.string()},
                    {"products", cfg.products.string()},
                    {"n_rows", impressions.size()},
                    {"n_products", products.size()}};
    std::cout << summary.dump() << "\n";
    return summary;
}

namespace detail {

inline dataset::JoinedTable load_joined(const RunConfig& cfg) {
    const auto impressions = dataset::load_impressions(cfg.impressions);
    const auto products = dataset::load_products(cfg.products);
    return dataset::join(impressions, products);
}

inline preprocess::FeatureMatrix prepare_labeled(const RunConfig& cfg,
                                                 preprocess::LabelEncoder& enc,
                                                 preprocess::Imputer& imp) {
    const auto joined = load_joined(cfg);
    if (!joined.labels) fail("InvalidParams", "training requires labeled impressions");
    enc = preprocess::fit_encoder(joined);
    imp = preprocess::fit_imputer(joined);
    return preprocess::transform(joined, enc, imp);
}

inline void write_losscurve(const trainer::CvResult& cv, const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write " + path.string());
    csv::write_row(out, {"iteration", "fold", "train_logloss", "valid_logloss"});
    for (std::size_t f = 0; f < cv.curves.size(); ++f) {
        const auto& c = cv.curves[f];
        for (std::size_t it = 0; it < c.train.size(); ++it) {
            csv::write_row(out, {std::to_string(it + 1), std::to_string(f + 1),
                                 csv::format_double(c.train[it]),
                                 csv::format_double(c.valid[it])});
        }
    }
}

inline void write_oof(const trainer::CvResult& cv, const preprocess::FeatureMatrix& x,
                      const fs::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write " + path.string());
    csv::write_row(out, {"query_id", "product_id", "is_click", "fold", "probability"});
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        csv::write_row(out, {x.groups[i], x.product_ids[i], std::to_string((*x.labels)[i]),
                             std::to_string(cv.plan.assignment[i]),
                             csv::format_double(cv.oof[i])});
    }
}

// Fits CV with the given params and persists the full run directory.
inline evalrank::MetricReport train_core(const RunConfig& cfg, const gbdt::GbdtParams& params) {
    preprocess::LabelEncoder enc;
    preprocess::Imputer imp;
    const auto x = prepare_labeled(cfg, enc, imp);
    const auto cv =
        trainer::cv_train(x, params, cfg.k_folds, mix64(cfg.seed ^ 0xf01d00000003ull),
                          cfg.policy());

    fs::create_directories(cfg.out_dir);
    RunConfig echo = cfg;
    echo.gbdt = params;
    write_text(cfg.out_dir / "run_config.json", config_to_json(echo).dump(2) + "\n");
    write_text(cfg.out_dir / "preprocess.json",
               preprocess::preprocess_to_json(enc, imp).dump(2) + "\n");
    for (std::size_t f = 0; f < cv.models.size(); ++f) {
        write_text(cfg.out_dir / ("model_fold_" + std::to_string(f + 1) + ".json"),
                   gbdt::model_to_json(cv.models[f]).dump() + "\n");
    }
    write_oof(cv, x, cfg.out_dir / "oof_predictions.csv");
    write_losscurve(cv, cfg.out_dir / "losscurve.csv");
    write_text(cfg.out_dir / "metrics.json", cv.report.to_json().dump(2) + "\n");
    return cv.report;
}

struct LoadedModels {
    preprocess::LabelEncoder enc;
    preprocess::Imputer imp;
    std::vector<gbdt::GbdtModel> models;
};

inline LoadedModels load_models(const fs::path& dir) {
    LoadedModels loaded;
    const auto pre = read_json(dir / "preprocess.json");
    std::tie(loaded.enc, loaded.imp) = preprocess::preprocess_from_json(pre);
    for (int f = 1;; ++f) {
        const fs::path path = dir / ("model_fold_" + std::to_string(f) + ".json");
        if (!fs::exists(path)) break;
        loaded.models.push_back(gbdt::model_from_json(read_json(path)));
    }
    if (loaded.models.empty()) fail("IoError", "no model_fold_*.json in " + dir.string());
    return loaded;
}

}  // namespace detail

inline evalrank::MetricReport cmd_train(const RunConfig& cfg) {
    const auto report = detail::train_core(cfg, cfg.gbdt);
    std::cout << report.to_json().dump() << "\n";
    return report;
}

inline evalrank::MetricReport cmd_tune(const RunConfig& cfg) {
    preprocess::LabelEncoder enc;
    preprocess::Imputer imp;
    const auto x = detail::prepare_labeled(cfg, enc, imp);

    fs::create_directories(cfg.out_dir);
    const fs::path log_path = cfg.out_dir / "tpe_trials.jsonl";
    std::vector<tpe::Trial> history;
    if (fs::exists(log_path)) {
        std::istringstream lines(detail::read_text(log_path));
        std::string line;
        std::size_t line_no = 0;
        while (std::getline(lines, line)) {
            ++line_no;
            if (line.empty()) continue;
            json doc = json::parse(line, nullptr, false);
            if (doc.is_discarded()) {
                fail("IoError", log_path.string() + ":" + std::to_string(line_no) +
                                    ": not valid JSON");
            }
            tpe::Trial trial;
            for (const auto& [k, v] : doc.at("point").items()) trial.point[k] = v.get<double>();
            if (doc.at("status").get<std::string>() == "complete") {
                trial.status = tpe::TrialStatus::complete;
                trial.objective = doc.at("objective").get<double>();
            }
            if (trial.status == tpe::TrialStatus::complete && !cfg.space.contains(trial.point)) {
                fail("InvalidParams", log_path.string() + ":" + std::to_string(line_no) +
                                          ": logged point lies outside the configured space");
            }
            history.push_back(std::move(trial));
        }
    }

    std::ofstream log(log_path, std::ios::binary | std::ios::app);
    if (!log) fail("IoError", "cannot write " + log_path.string());
    std::size_t trial_no = history.size();
    auto on_trial = [&](const tpe::Trial& trial) {
        json line;
        line["trial"] = ++trial_no;
        line["point"] = trial.point;
        if (trial.status == tpe::TrialStatus::complete) {
            line["objective"] = trial.objective;
            line["status"] = "complete";
        } else {
            line["objective"] = nullptr;
            line["status"] = "failed";
        }
        line["timestamp"] = detail::utc_timestamp();
        log << line.dump() << "\n" << std::flush;
    };

    const auto cv_seed = mix64(cfg.seed ^ 0xf01d00000003ull);
    auto objective = [&](const tpe::Point& point) {
        const auto params = trainer::apply_point(cfg.gbdt, point);
        params.validate();
        return *trainer::cv_train(x, params, cfg.k_folds, cv_seed, cfg.policy())
                    .report.mean_logloss;
    };
    const auto search =
        tpe::minimize(objective, cfg.space, cfg.n_trials, cfg.tpe, std::move(history), on_trial);

    const auto best_params = trainer::apply_point(cfg.gbdt, search.best_point);
    json best;
    best["point"] = search.best_point;
    best["objective"] = search.best_value;
    best["params"] = params_to_json(best_params);
    detail::write_text(cfg.out_dir / "best_params.json", best.dump(2) + "\n");

    const auto report = detail::train_core(cfg, best_params);
    json summary = report.to_json();
    summary["best_point"] = search.best_point;
    summary["best_objective"] = search.best_value;
    std::cout << summary.dump() << "\n";
    return report;
}

inline json cmd_predict(const RunConfig& cfg) {
    const auto loaded = detail::load_models(cfg.model_dir_or_default());
    const auto joined = detail::load_joined(cfg);
    const auto x = preprocess::transform(joined, loaded.enc, loaded.imp);
    const auto probs = trainer::predict_ensemble(loaded.models, x);

    std::vector<evalrank::ScoredRow> rows;
    rows.reserve(x.n_rows);
    for (std::size_t i = 0; i < x.n_rows; ++i) {
        rows.push_back({x.groups[i], x.product_ids[i], probs[i]});
    }
    const auto rankings = evalrank::rank_queries(rows);
    const auto out_path = cfg.submission_or_default();
    if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
    evalrank::write_submission(rankings, out_path, /*with_probability=*/true);

    json summary = {{"submission", out_path.string()},
                    {"n_queries", rankings.size()},
                    {"n_rows", x.n_rows}};
    std::cout << summary.dump() << "\n";
    return summary;
}

inline evalrank::MetricReport cmd_evaluate(const RunConfig& cfg) {
    bool has_prob = false;
    const auto rankings = evalrank::read_submission(cfg.submission_or_default(), &has_prob);
    const auto impressions = dataset::load_impressions(cfg.impressions);

    evalrank::LabelMap labels;
    for (const auto& imp : impressions) {
        if (!imp.is_click) fail("MissingLabel", "impressions file has unlabeled rows");
        labels.add(imp.query_id, imp.product_id, *imp.is_click);
    }

    evalrank::MetricReport report;
    report.mrr = evalrank::mrr(rankings, labels, cfg.policy());
    report.n_queries = rankings.size();
    report.n_rows = rankings.size() * evalrank::kGroupSize;
    if (has_prob) {
        std::vector<std::uint8_t> y;
        std::vector<double> p;
        for (const auto& r : rankings) {
            for (const auto& prod : r.products) {
                const auto label = labels.get(r.query_id, prod.product_id);
                if (!label) {
                    fail("MissingLabel", "no label for query_id '" + r.query_id +
                                             "', product_id '" + prod.product_id + "'");
                }
                y.push_back(static_cast<std::uint8_t>(*label));
                p.push_back(prod.probability);
            }
        }
        report.mean_logloss = evalrank::logloss(y, p);
    }
    std::cout << report.to_json().dump() << "\n";
    return report;
}

namespace detail {

// Minimal hand-rolled SVG line chart; one polyline per (fold, series).
inline std::string losscurve_svg(std::size_t n_folds,
                                 const std::vector<std::vector<double>>& train,
                                 const std::vector<std::vector<double>>& valid) {
    const double w = 720, h = 480, ml = 60, mr = 20, mt = 20, mb = 40;
    double lo = 1e300, hi = -1e300;
    std::size_t n_iter = 0;
    for (std::size_t f = 0; f < n_folds; ++f) {
        for (const double v : train[f]) lo = std::min(lo, v), hi = std::max(hi, v);
        for (const double v : valid[f]) lo = std::min(lo, v), hi = std::max(hi, v);
        n_iter = std::max(n_iter, train[f].size());
    }
    if (n_iter == 0 || hi <= lo) hi = lo + 1.0;
    const double px = (w - ml - mr) / std::max<std::size_t>(n_iter - 1, 1);
    const double py = (h - mt - mb) / (hi - lo);
    auto poly = [&](const std::vector<double>& ys, const char* color, const char* dash) {
        std::ostringstream s;
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
        if (*dash) s << " stroke-dasharray=\"" << dash << "\"";
        s << " points=\"";
        for (std::size_t i = 0; i < ys.size(); ++i) {
            s << (ml + px * static_cast<double>(i)) << "," << (h - mb - py * (ys[i] - lo)) << " ";
        }
        s << "\"/>\n";
        return s.str();
    };
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << (h - mb) << "\" x2=\"" << (w - mr) << "\" y2=\""
        << (h - mb) << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << (h - mb)
        << "\" stroke=\"black\"/>\n";
    for (std::size_t f = 0; f < n_folds; ++f) {
        svg << poly(train[f], "#1f77b4", "");
        svg << poly(valid[f], "#d62728", "4 3");
    }
    svg << "<text x=\"" << (ml - 8) << "\" y=\"" << (h - mb + 4)
        << "\" text-anchor=\"end\" font-size=\"12\">" << lo << "</text>\n";
    svg << "<text x=\"" << (ml - 8) << "\" y=\"" << (mt + 4)
        << "\" text-anchor=\"end\" font-size=\"12\">" << hi << "</text>\n";
    svg << "<text x=\"" << (w / 2) << "\" y=\"" << (h - 8)
        << "\" text-anchor=\"middle\" font-size=\"12\">iteration (solid train, dashed "
           "validation)</text>\n";
    svg << "</svg>\n";
    return svg.str();
}

inline std::string importance_svg(const std::vector<std::pair<std::string, double>>& items) {
    const double bar_h = 16, gap = 6, ml = 180, w = 720;
    const double h = 20 + static_cast<double>(items.size()) * (bar_h + gap);
    double max_v = 0.0;
    for (const auto& [_, v] : items) max_v = std::max(max_v, v);
    if (max_v <= 0.0) max_v = 1.0;
    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
        << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    double y = 10;
    for (const auto& [name, v] : items) {
        svg << "<text x=\"" << (ml - 6) << "\" y=\"" << (y + bar_h - 4)
            << "\" text-anchor=\"end\" font-size=\"11\">" << name << "</text>\n";
        svg << "<rect x=\"" << ml << "\" y=\"" << y << "\" width=\""
            << ((w - ml - 60) * v / max_v) << "\" height=\"" << bar_h
            << "\" fill=\"#1f77b4\"/>\n";
        svg << "<text x=\"" << (ml + (w - ml - 60) * v / max_v + 4) << "\" y=\""
            << (y + bar_h - 4) << "\" font-size=\"11\">" << v << "</text>\n";
        y += bar_h + gap;
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace detail

inline json cmd_plot(const RunConfig& cfg) {
    const fs::path dir = cfg.out_dir;
    const fs::path curve_path = dir / "losscurve.csv";
    const bool have_curve = fs::exists(curve_path);
    const bool have_models = fs::exists(dir / "model_fold_1.json");
    if (!have_curve && !have_models) {
        fail("IoError", dir.string() + " holds no training artifacts to plot");
    }
    json written = json::array();

    if (have_curve) {
        const auto table = csv::read_file(curve_path);
        std::size_t n_folds = 0;
        std::vector<std::vector<double>> train, valid;
        for (const auto& rec : table.rows) {
            double fold = 0, tl = 0, vl = 0;
            if (rec.fields.size() != 4 || !csv::parse_double(rec.fields[1], fold) ||
                !csv::parse_double(rec.fields[2], tl) || !csv::parse_double(rec.fields[3], vl)) {
                fail("MalformedRow", curve_path.string() + ": line " + std::to_string(rec.line));
            }
            const auto f = static_cast<std::size_t>(fold);
            n_folds = std::max(n_folds, f);
            train.resize(n_folds);
            valid.resize(n_folds);
            train[f - 1].push_back(tl);
            valid[f - 1].push_back(vl);
        }
        detail::write_text(dir / "losscurve.svg",
                           detail::losscurve_svg(n_folds, train, valid));
        written.push_back((dir / "losscurve.svg").string());
    }

    if (have_models) {
        const auto loaded = detail::load_models(dir);
        const auto names = loaded.models.front().feature_names();
        std::vector<double> mean(names.size(), 0.0);
        for (const auto& model : loaded.models) {
            if (model.split_improvements.size() != mean.size()) {
                fail("IoError", "fold models disagree on feature layout");
            }
            for (std::size_t i = 0; i < mean.size(); ++i) {
                mean[i] += model.split_improvements[i];
            }
        }
        const double total = std::accumulate(mean.begin(), mean.end(), 0.0);
        if (total > 0.0) {
            for (double& v : mean) v = 100.0 * v / total;
        }
        std::vector<std::pair<std::string, double>> items;
        for (std::size_t i = 0; i < names.size(); ++i) items.emplace_back(names[i], mean[i]);
        std::stable_sort(items.begin(), items.end(),
                         [](const auto& a, const auto& b) { return a.second > b.second; });

        std::ofstream out(dir / "importance.csv", std::ios::binary);
        if (!out) fail("IoError", "cannot write importance.csv");
        csv::write_row(out, {"feature", "importance"});
        for (const auto& [name, v] : items) {
            csv::write_row(out, {name, csv::format_double(v)});
        }
        out.close();
        detail::write_text(dir / "importance.svg", detail::importance_svg(items));
        written.push_back((dir / "importance.csv").string());
        written.push_back((dir / "importance.svg").string());
    }

    json summary = {{"written", written}};
    std::cout << summary.dump() << "\n";
    return summary;
}

}  // namespace rankforge::pipeline
