// Acceptance gate: one self-contained check per release criterion, each
// printing a single [PASS]/[FAIL] line. Exit code is the number of failed
// criteria. `--only N` runs criterion N alone (used by ctest).

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "helpers.hpp"
#include "rankforge/dataset.hpp"
#include "rankforge/evalrank.hpp"
#include "rankforge/gbdt.hpp"
#include "rankforge/pipeline.hpp"
#include "rankforge/preprocess.hpp"
#include "rankforge/rng.hpp"
#include "rankforge/tpe.hpp"
#include "rankforge/trainer.hpp"

using namespace rankforge;

namespace {

struct Checker {
    std::vector<std::string> failures;

    void expect(bool ok, const std::string& what) {
        if (!ok) failures.push_back(what);
    }
};

bool close_rel(double a, double b, double tol) {
    return std::abs(a - b) <= tol * std::max(1.0, std::abs(b));
}

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
}

preprocess::FeatureMatrix synthetic_matrix(std::size_t n_queries, double signal,
                                           std::uint64_t seed) {
    const auto [impressions, products] =
        dataset::generate_synthetic(n_queries, 300, 60, signal, seed);
    const auto table = dataset::join(impressions, products);
    const auto enc = preprocess::fit_encoder(table);
    const auto imp = preprocess::fit_imputer(table);
    return preprocess::transform(table, enc, imp);
}

// ---- 1: metric oracles -------------------------------------------------------

double oracle_logloss(const std::vector<std::uint8_t>& y, const std::vector<double>& p) {
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        double pc = p[i];
        if (pc < 1e-15) pc = 1e-15;
        if (pc > 1.0 - 1e-15) pc = 1.0 - 1e-15;
        sum += y[i] == 1 ? -std::log(pc) : -std::log(1.0 - pc);
    }
    return sum / static_cast<double>(y.size());
}

void criterion_metric_oracles(Checker& c) {
    {
        const std::vector<std::uint8_t> y = {1};
        const std::vector<double> p = {0.5};
        c.expect(evalrank::logloss(y, p) == -std::log(0.5), "logloss(y=1, p=0.5) is not ln 2");
    }
    {
        const std::vector<std::uint8_t> y = {0};
        const std::vector<double> p = {0.9};
        c.expect(evalrank::logloss(y, p) == -std::log(1.0 - 0.9),
                 "logloss(y=0, p=0.9) is not -ln 0.1");
    }
    {
        // clicked products at ranks 1 and 4
        std::vector<evalrank::ScoredRow> rows;
        evalrank::LabelMap labels;
        const std::vector<double> probs = {0.9, 0.5, 0.4, 0.3, 0.2, 0.1};
        for (int q = 0; q < 2; ++q) {
            const std::string qid = "q" + std::to_string(q);
            for (int i = 0; i < 6; ++i) {
                const std::string pid = "P" + std::to_string(i);
                rows.push_back({qid, pid, probs[static_cast<std::size_t>(i)]});
                labels.add(qid, pid, i == (q == 0 ? 0 : 3) ? 1 : 0);
            }
        }
        c.expect(evalrank::mrr(evalrank::rank_queries(rows), labels) == 0.625,
                 "mrr over clicked ranks 1 and 4 is not exactly 0.625");
    }

    Rng rng(101);
    for (int iter = 0; iter < 200 && c.failures.size() < 3; ++iter) {
        const std::size_t n = 1 + rng.below(50);
        std::vector<std::uint8_t> y(n);
        std::vector<double> p(n);
        for (std::size_t i = 0; i < n; ++i) {
            y[i] = static_cast<std::uint8_t>(rng.below(2));
            p[i] = rng.uniform01() * 1.2 - 0.1;  // exercises the clip
        }
        if (!close_rel(evalrank::logloss(y, p), oracle_logloss(y, p), 1e-12)) {
            c.expect(false, "logloss diverges from the oracle at instance " +
                                std::to_string(iter));
        }

        const std::size_t n_q = 1 + rng.below(30);
        std::vector<evalrank::ScoredRow> rows;
        evalrank::LabelMap labels;
        double oracle_sum = 0.0;
        for (std::size_t q = 0; q < n_q; ++q) {
            const std::string qid = "q" + std::to_string(q);
            std::vector<double> probs(6);
            for (auto& v : probs) v = static_cast<double>(rng.below(5)) / 5.0;  // forces ties
            const std::size_t clicked = rng.below(6);
            int rank = 1;
            for (std::size_t j = 0; j < 6; ++j) {
                if (probs[j] > probs[clicked]) ++rank;
                if (j < clicked && probs[j] == probs[clicked]) ++rank;
            }
            oracle_sum += 1.0 / rank;
            for (std::size_t j = 0; j < 6; ++j) {
                const std::string pid = "P" + std::to_string(j);
                rows.push_back({qid, pid, probs[j]});
                labels.add(qid, pid, j == clicked ? 1 : 0);
            }
        }
        const double got = evalrank::mrr(evalrank::rank_queries(rows), labels);
        if (!close_rel(got, oracle_sum / static_cast<double>(n_q), 1e-12)) {
            c.expect(false, "mrr diverges from the counting oracle at instance " +
                                std::to_string(iter));
        }
    }
}

// ---- 2: random-baseline MRR --------------------------------------------------

void criterion_random_baseline(Checker& c) {
    Rng rng(20268);
    std::vector<evalrank::ScoredRow> rows;
    evalrank::LabelMap labels;
    const std::size_t n_queries = 10000;
    rows.reserve(n_queries * 6);
    for (std::size_t q = 0; q < n_queries; ++q) {
        const std::string qid = "q" + std::to_string(q);
        const std::size_t clicked = rng.below(6);
        for (std::size_t j = 0; j < 6; ++j) {
            const std::string pid = "P" + std::to_string(j);
            rows.push_back({qid, pid, rng.uniform01()});
            labels.add(qid, pid, j == clicked ? 1 : 0);
        }
    }
    const double mrr = evalrank::mrr(evalrank::rank_queries(rows), labels);
    c.expect(std::abs(mrr - 0.40833) <= 0.01,
             "uniform-random mrr " + fmt(mrr) + " is not 0.40833 +- 0.01");
}

// ---- 3: ordered-TS no-leakage ------------------------------------------------

void criterion_ordered_ts(Checker& c) {
    Rng rng(303);
    for (int ds = 0; ds < 100 && c.failures.size() < 3; ++ds) {
        const std::size_t n = 2 + rng.below(79);
        std::vector<std::int32_t> cat(n);
        std::vector<std::uint8_t> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            cat[i] = static_cast<std::int32_t>(rng.below(6)) + 1;
            y[i] = static_cast<std::uint8_t>(rng.below(2));
        }
        const auto perm = rng.permutation(n);
        const double a = 0.5 + rng.uniform01() * 2.0;
        const double p = rng.uniform01();
        std::vector<std::size_t> pos(n);
        for (std::size_t i = 0; i < n; ++i) pos[perm[i]] = i;

        const auto base = gbdt::ordered_target_statistics(cat, y, perm, a, p);

        // O(n^2) prefix-scan oracle
        for (std::size_t r = 0; r < n; ++r) {
            double sum = 0.0;
            double count = 0.0;
            for (std::size_t s = 0; s < n; ++s) {
                if (pos[s] < pos[r] && cat[s] == cat[r]) {
                    sum += y[s];
                    count += 1.0;
                }
            }
            if (!close_rel(base[r], (sum + a * p) / (count + a), 1e-12)) {
                c.expect(false, "dataset " + std::to_string(ds) + ": row " + std::to_string(r) +
                                    " diverges from the prefix-scan oracle");
                break;
            }
        }

        for (std::size_t r = 0; r < n; ++r) {
            auto mutated = y;
            mutated[r] = static_cast<std::uint8_t>(1 - mutated[r]);
            const auto out = gbdt::ordered_target_statistics(cat, mutated, perm, a, p);
            if (out[r] != base[r]) {
                c.expect(false, "dataset " + std::to_string(ds) + ": flipping y[" +
                                    std::to_string(r) + "] changed its own encoding");
                break;
            }
            bool clean = true;
            for (std::size_t s = 0; s < n && clean; ++s) {
                if (out[s] != base[s]) {
                    clean = pos[s] > pos[r] && cat[s] == cat[r];
                }
            }
            if (!clean) {
                c.expect(false, "dataset " + std::to_string(ds) + ": flipping y[" +
                                    std::to_string(r) +
                                    "] leaked outside later same-category rows");
                break;
            }
        }
    }
}

// ---- 4: gradient check -------------------------------------------------------

void criterion_gradient_check(Checker& c) {
    const auto loss = [](int y, double s) {
        const double p = gbdt::sigmoid(s);
        return y ? -std::log(p) : -std::log(1.0 - p);
    };
    const double eps = 1e-6;
    for (const int y : {0, 1}) {
        for (double s = -5.0; s <= 5.0 + 1e-9; s += 0.25) {
            const auto pair = gbdt::logloss_grad(y, s);
            const double g_fd = (loss(y, s + eps) - loss(y, s - eps)) / (2.0 * eps);
            const double h_fd =
                (gbdt::logloss_grad(y, s + eps).g - gbdt::logloss_grad(y, s - eps).g) /
                (2.0 * eps);
            if (std::abs(pair.g - g_fd) > 1e-6) {
                c.expect(false, "gradient at y=" + std::to_string(y) + ", s=" + fmt(s) +
                                    " differs from central difference by " +
                                    fmt(std::abs(pair.g - g_fd)));
            }
            if (std::abs(pair.h - h_fd) > 1e-6) {
                c.expect(false, "hessian at y=" + std::to_string(y) + ", s=" + fmt(s) +
                                    " differs from central difference by " +
                                    fmt(std::abs(pair.h - h_fd)));
            }
        }
    }
}

// ---- 5: learnability ---------------------------------------------------------

void criterion_learnability(Checker& c) {
    const auto m = synthetic_matrix(2000, 1.0, 505);
    gbdt::GbdtParams params;
    params.n_trees = 200;
    params.max_depth = 4;
    params.learning_rate = 0.1;
    const auto cv = trainer::cv_train(m, params, 5, 505);
    c.expect(cv.report.mrr >= 0.95,
             "out-of-fold mrr " + fmt(cv.report.mrr) + " is below 0.95");
    for (std::size_t f = 0; f < cv.curves.size(); ++f) {
        const auto& train = cv.curves[f].train;
        for (std::size_t i = 1; i < train.size(); ++i) {
            if (train[i] > train[i - 1] + 1e-12) {
                c.expect(false, "fold " + std::to_string(f + 1) +
                                    " training logloss rises at iteration " +
                                    std::to_string(i + 1));
                break;
            }
        }
    }
}

// ---- 6: tuning lift ----------------------------------------------------------

void criterion_tuning_lift(Checker& c) {
    int wins = 0;
    for (int s = 0; s < 5; ++s) {
        const auto m = synthetic_matrix(2000, 0.7, 600 + static_cast<std::uint64_t>(s));
        gbdt::GbdtParams base;
        base.learning_rate = 0.03;
        base.l2_leaf_reg = 3.0;
        base.n_trees = 60;
        base.max_depth = 4;
        const std::uint64_t cv_seed = 700 + static_cast<std::uint64_t>(s);

        const auto defaults = trainer::cv_train(m, base, 5, cv_seed);
        tpe::TpeConfig cfg;
        cfg.seed = 800 + static_cast<std::uint64_t>(s);
        const auto tuned =
            trainer::tune(m, pipeline::default_space(), 25, 5, cfg, base, cv_seed);
        if (tuned.search.best_value <= *defaults.report.mean_logloss) {
            ++wins;
        }
    }
    c.expect(wins >= 4, "tuning beat the defaults in only " + std::to_string(wins) +
                            " of 5 paired seeds");
}

// ---- 7: TPE vs random --------------------------------------------------------

void criterion_tpe_vs_random(Checker& c) {
    tpe::SearchSpace space;
    space.dims.emplace_back("x", tpe::Uniform{0.0, 1.0});
    const auto objective = [](const tpe::Point& p) {
        const double d = p.at("x") - 0.3;
        return d * d;
    };
    double tpe_sum = 0.0;
    double random_sum = 0.0;
    int hits = 0;
    for (std::uint64_t s = 1; s <= 20; ++s) {
        tpe::TpeConfig cfg;
        cfg.seed = s;
        const auto guided = tpe::minimize(objective, space, 50, cfg);
        const auto random = tpe::random_search(objective, space, 50, s);
        tpe_sum += guided.best_value;
        random_sum += random.best_value;
        if (std::abs(guided.best_point.at("x") - 0.3) <= 0.05) ++hits;
    }
    c.expect(tpe_sum <= random_sum, "mean best value " + fmt(tpe_sum / 20.0) +
                                        " exceeds random search's " + fmt(random_sum / 20.0));
    c.expect(hits >= 18, "best x landed within 0.05 of the optimum in only " +
                             std::to_string(hits) + " of 20 runs");
}

// ---- 8: stratification and determinism ----------------------------------------

void criterion_stratification_determinism(Checker& c) {
    Rng rng(808);
    for (int iter = 0; iter < 100 && c.failures.size() < 3; ++iter) {
        const int k = 2 + static_cast<int>(rng.below(5));
        const std::size_t n = static_cast<std::size_t>(k) + rng.below(500);
        std::vector<std::uint8_t> labels(n);
        for (auto& y : labels) y = static_cast<std::uint8_t>(rng.below(6) == 0 ? 1 : 0);
        const auto plan = trainer::stratified_kfold(labels, k, rng.below(10000));

        std::vector<std::size_t> size(static_cast<std::size_t>(k), 0);
        std::vector<std::size_t> pos(static_cast<std::size_t>(k), 0);
        bool in_range = true;
        for (std::size_t i = 0; i < n; ++i) {
            const int f = plan.assignment[i];
            if (f < 1 || f > k) {
                in_range = false;
                break;
            }
            ++size[static_cast<std::size_t>(f - 1)];
            if (labels[i] == 1) ++pos[static_cast<std::size_t>(f - 1)];
        }
        if (!in_range) {
            c.expect(false, "instance " + std::to_string(iter) + ": row outside folds 1..k");
            continue;
        }
        const auto [smin, smax] = std::minmax_element(size.begin(), size.end());
        const auto [pmin, pmax] = std::minmax_element(pos.begin(), pos.end());
        c.expect(*smax - *smin <= 1,
                 "instance " + std::to_string(iter) + ": fold sizes differ by more than one");
        c.expect(*pmax - *pmin <= 1,
                 "instance " + std::to_string(iter) + ": positives differ by more than one");
    }

    std::string first_submission;
    for (int round = 0; round < 2; ++round) {
        testutil::TempDir dir("acceptance8");
        pipeline::RunConfig cfg;
        cfg.impressions = dir.file("impressions.csv");
        cfg.products = dir.file("products.csv");
        cfg.out_dir = dir.file("run");
        cfg.seed = 42;
        cfg.k_folds = 2;
        cfg.generate.n_queries = 50;
        cfg.generate.n_users = 20;
        cfg.generate.n_products = 12;
        cfg.gbdt.n_trees = 5;
        cfg.gbdt.max_depth = 2;
        testutil::CoutCapture mute;
        pipeline::cmd_generate(cfg);
        pipeline::cmd_train(cfg);
        pipeline::cmd_predict(cfg);
        const auto submission = testutil::read_file(cfg.out_dir / "submission.csv");
        if (round == 0) {
            first_submission = submission;
            c.expect(!submission.empty(), "first pipeline run produced no submission");
        } else {
            c.expect(submission == first_submission,
                     "repeated pipeline runs differ byte-for-byte");
        }
    }
}

// ---- 9: search-space sanity ----------------------------------------------------

void criterion_space_sanity(Checker& c) {
    const auto space = pipeline::default_space();
    space.validate();
    c.expect(space.contains({{"learning_rate", 0.16610}, {"l2_leaf_reg", 2.0}}),
             "the published optimum is outside the search space");
    const auto& l2 = std::get<tpe::QLogUniform>(space.dims[1].second);
    c.expect(l2.k_min() == 1 && l2.k_max() == 7,
             "quantized support is not {1..7}");
}

struct Criterion {
    int id;
    const char* name;
    double budget_seconds;
    void (*run)(Checker&);
};

const Criterion kCriteria[] = {
    {1, "metric-oracles", 1.0, criterion_metric_oracles},
    {2, "random-baseline-mrr", 10.0, criterion_random_baseline},
    {3, "ordered-ts-no-leakage", 5.0, criterion_ordered_ts},
    {4, "gradient-check", 1.0, criterion_gradient_check},
    {5, "learnability", 120.0, criterion_learnability},
    {6, "tuning-lift", 1800.0, criterion_tuning_lift},
    {7, "tpe-vs-random", 5.0, criterion_tpe_vs_random},
    {8, "stratification-determinism", 30.0, criterion_stratification_determinism},
    {9, "search-space-sanity", 1.0, criterion_space_sanity},
};

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    for (int i = 1; i < argc; ++i) {
        if (std::string(argv[i]) == "--only" && i + 1 < argc) {
            only = std::atoi(argv[++i]);
        }
    }

    int failed = 0;
    for (const auto& criterion : kCriteria) {
        if (only != 0 && criterion.id != only) continue;
        Checker checker;
        const auto start = std::chrono::steady_clock::now();
        try {
            criterion.run(checker);
        } catch (const std::exception& e) {
            checker.failures.push_back(std::string("exception: ") + e.what());
        }
        const double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (elapsed > criterion.budget_seconds) {
            checker.failures.push_back("runtime " + fmt(elapsed) + "s exceeds the " +
                                       fmt(criterion.budget_seconds) + "s budget");
        }

        std::ostringstream line;
        line.precision(2);
        line << std::fixed;
        line << (checker.failures.empty() ? "[PASS] " : "[FAIL] ") << criterion.id << " "
             << criterion.name << " (" << elapsed << "s)";
        if (!checker.failures.empty()) {
            line << ": " << checker.failures.front();
            if (checker.failures.size() > 1) {
                line << " (+" << checker.failures.size() - 1 << " more)";
            }
            ++failed;
        }
        std::cout << line.str() << std::endl;
    }
    return failed;
}
