// rankforge CLI: generate | train | tune | predict | evaluate | plot.
// Flags override the JSON config; the config file itself is optional.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "rankforge/pipeline.hpp"

namespace {

using rankforge::pipeline::json;

struct Overrides {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out_dir;
    std::optional<std::string> impressions;
    std::optional<std::string> products;
    std::optional<std::string> model_dir;
    std::optional<std::string> submission;
    std::optional<int> k_folds;
    std::optional<std::size_t> n_trials;
    std::optional<std::size_t> n_queries;
    std::optional<double> signal;
    std::optional<double> learning_rate;
    std::optional<double> l2_leaf_reg;
    std::optional<int> n_trees;
    std::optional<int> max_depth;
    bool exclude_unclicked = false;
};

void add_common(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config_path, "JSON config file");
    cmd->add_option("--seed", o.seed, "run seed override");
    cmd->add_option("--out", o.out_dir, "output directory override");
    cmd->add_option("--impressions", o.impressions, "impressions CSV path");
    cmd->add_option("--products", o.products, "products CSV path");
}

rankforge::pipeline::RunConfig build_config(const Overrides& o) {
    json doc = json::object();
    if (!o.config_path.empty()) {
        doc = rankforge::pipeline::detail::read_json(o.config_path);
    }
    if (o.seed) doc["seed"] = *o.seed;
    if (o.out_dir) doc["out_dir"] = *o.out_dir;
    if (o.impressions) doc["impressions"] = *o.impressions;
    if (o.products) doc["products"] = *o.products;
    if (o.model_dir) doc["model_dir"] = *o.model_dir;
    if (o.submission) doc["submission"] = *o.submission;
    if (o.k_folds) doc["k_folds"] = *o.k_folds;
    if (o.n_trials) doc["n_trials"] = *o.n_trials;
    if (o.n_queries) doc["generate"]["n_queries"] = *o.n_queries;
    if (o.signal) doc["generate"]["signal_strength"] = *o.signal;
    if (o.learning_rate) doc["gbdt"]["learning_rate"] = *o.learning_rate;
    if (o.l2_leaf_reg) doc["gbdt"]["l2_leaf_reg"] = *o.l2_leaf_reg;
    if (o.n_trees) doc["gbdt"]["n_trees"] = *o.n_trees;
    if (o.max_depth) doc["gbdt"]["max_depth"] = *o.max_depth;
    if (o.exclude_unclicked) doc["exclude_unclicked"] = true;
    return rankforge::pipeline::load_config(doc);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"click-ranking pipeline: synthetic data, boosted trees, TPE tuning"};
    app.require_subcommand(1);
    Overrides o;

    auto* generate = app.add_subcommand("generate", "write synthetic impressions + products CSVs");
    add_common(generate, o);
    generate->add_option("--queries", o.n_queries, "number of queries");
    generate->add_option("--signal", o.signal, "planted signal strength in [0,1]");

    auto* train = app.add_subcommand("train", "stratified K-fold training run");
    add_common(train, o);
    train->add_option("--k", o.k_folds, "fold count");
    train->add_option("--learning-rate", o.learning_rate, "boosting step size");
    train->add_option("--l2", o.l2_leaf_reg, "leaf L2 regularization");
    train->add_option("--trees", o.n_trees, "boosting iterations");
    train->add_option("--depth", o.max_depth, "tree depth");

    auto* tune = app.add_subcommand("tune", "TPE hyperparameter search, then a final train");
    add_common(tune, o);
    tune->add_option("--k", o.k_folds, "fold count");
    tune->add_option("--trials", o.n_trials, "total trial budget");

    auto* predict = app.add_subcommand("predict", "rank products with a trained run directory");
    add_common(predict, o);
    predict->add_option("--model-dir", o.model_dir, "directory holding a completed train run");
    predict->add_option("--submission", o.submission, "submission CSV to write");

    auto* evaluate = app.add_subcommand("evaluate", "score a submission against labels");
    add_common(evaluate, o);
    evaluate->add_option("--submission", o.submission, "submission CSV to score");
    evaluate->add_flag("--exclude-unclicked", o.exclude_unclicked,
                       "drop zero-click queries from the MRR mean");

    auto* plot = app.add_subcommand("plot", "emit loss-curve and feature-importance artifacts");
    add_common(plot, o);

    CLI11_PARSE(app, argc, argv);

    try {
        const auto cfg = build_config(o);
        if (generate->parsed()) rankforge::pipeline::cmd_generate(cfg);
        if (train->parsed()) rankforge::pipeline::cmd_train(cfg);
        if (tune->parsed()) rankforge::pipeline::cmd_tune(cfg);
        if (predict->parsed()) rankforge::pipeline::cmd_predict(cfg);
        if (evaluate->parsed()) rankforge::pipeline::cmd_evaluate(cfg);
        if (plot->parsed()) rankforge::pipeline::cmd_plot(cfg);
    } catch (const rankforge::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: Internal: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
