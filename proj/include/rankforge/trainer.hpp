#pragma once

// Stratified K-fold cross-validated training: K fold models with
// per-iteration loss curves, out-of-fold predictions assembled across folds,
// ensemble prediction by probability mean, and the tune loop that feeds
// out-of-fold logloss to the optimizer.

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "rankforge/errors.hpp"
#include "rankforge/evalrank.hpp"
#include "rankforge/gbdt.hpp"
#include "rankforge/preprocess.hpp"
#include "rankforge/rng.hpp"
#include "rankforge/tpe.hpp"

namespace rankforge::trainer {

using preprocess::FeatureMatrix;

struct FoldPlan {
    int k = 0;
    std::vector<int> assignment;  // per row, in 1..k
    std::uint64_t seed = 0;

    std::vector<std::size_t> rows_in(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] == fold) out.push_back(i);
        }
        return out;
    }
    std::vector<std::size_t> rows_not_in(int fold) const {
        std::vector<std::size_t> out;
        for (std::size_t i = 0; i < assignment.size(); ++i) {
            if (assignment[i] != fold) out.push_back(i);
        }
        return out;
    }
};

// Each class is shuffled separately, then rows are dealt onto folds by one
// round-robin cursor that keeps running across classes. That makes both the
// per-class counts and the total fold sizes differ by at most one.
inline FoldPlan stratified_kfold(std::span<const std::uint8_t> labels, int k,
                                 std::uint64_t seed) {
    if (k < 2) fail("BadK", "fold count must be at least 2, got " + std::to_string(k));
    if (static_cast<std::size_t>(k) > labels.size()) {
        fail("BadK", "fold count " + std::to_string(k) + " exceeds row count " +
                         std::to_string(labels.size()));
    }
    FoldPlan plan;
    plan.k = k;
    plan.seed = seed;
    plan.assignment.assign(labels.size(), 0);
    Rng rng(seed);
    std::size_t cursor = 0;
    for (const int cls : {1, 0}) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < labels.size(); ++i) {
            if (labels[i] == cls) rows.push_back(i);
        }
        rng.shuffle(rows);
        for (const std::size_t r : rows) {
            plan.assignment[r] = static_cast<int>(cursor % k) + 1;
            ++cursor;
        }
    }
    return plan;
}

struct FoldCurves {
    std::vector<double> train;  // logloss per boosting iteration
    std::vector<double> valid;
};

struct CvResult {
    FoldPlan plan;
    std::vector<gbdt::GbdtModel> models;   // models[f] never saw fold f+1
    std::vector<FoldCurves> curves;
    std::vector<double> oof;               // out-of-fold probability per row
    evalrank::MetricReport report;         // metrics over the oof predictions
};

namespace detail {

inline unsigned thread_budget() {
    if (const char* env = std::getenv("RANKFORGE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v >= 1) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw ? hw : 1;
}

template <typename Fn>
void parallel_folds(int k, Fn&& body) {
    const unsigned workers = std::min<unsigned>(thread_budget(), static_cast<unsigned>(k));
    if (workers <= 1) {
        for (int f = 0; f < k; ++f) body(f);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::atomic<bool> failed{false};
    auto run = [&] {
        for (int f = next.fetch_add(1); f < k; f = next.fetch_add(1)) {
            try {
                body(f);
            } catch (...) {
                if (!failed.exchange(true)) error = std::current_exception();
            }
        }
    };
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(run);
    for (auto& t : threads) t.join();
    if (failed) std::rethrow_exception(error);
}

}  // namespace detail

inline CvResult cv_train(const FeatureMatrix& x, const gbdt::GbdtParams& params, int k,
                         std::uint64_t seed,
                         evalrank::ZeroClickPolicy policy = evalrank::ZeroClickPolicy::count_as_zero) {
    if (!x.labels) fail("InvalidParams", "cross-validation needs labeled data");
    CvResult cv;
    cv.plan = stratified_kfold(*x.labels, k, seed);
    cv.models.resize(k);
    cv.curves.resize(k);
    cv.oof.assign(x.n_rows, 0.0);

    detail::parallel_folds(k, [&](int f) {
        const int fold = f + 1;
        const auto valid_rows = cv.plan.rows_in(fold);
        const FeatureMatrix train = x.select_rows(cv.plan.rows_not_in(fold));
        const FeatureMatrix valid = x.select_rows(valid_rows);
        gbdt::GbdtParams fold_params = params;
        fold_params.seed = mix64(params.seed ^ mix64(0xf01d0000u + fold));
        auto fitted = gbdt::fit_eval(train, fold_params, &valid);
        const auto probs = fitted.model.predict_proba(valid);
        for (std::size_t j = 0; j < valid_rows.size(); ++j) cv.oof[valid_rows[j]] = probs[j];
        cv.curves[f] = {std::move(fitted.train_curve), std::move(fitted.valid_curve)};
        cv.models[f] = std::move(fitted.model);
    });

    cv.report = evalrank::report_rows(x.groups, *x.labels, cv.oof, policy);
    return cv;
}

inline std::vector<double> predict_ensemble(std::span<const gbdt::GbdtModel> models,
                                            const FeatureMatrix& x) {
    if (models.empty()) fail("InvalidParams", "no models to ensemble");
    std::vector<double> mean(x.n_rows, 0.0);
    for (const auto& model : models) {
        const auto probs = model.predict_proba(x);
        for (std::size_t i = 0; i < x.n_rows; ++i) mean[i] += probs[i];
    }
    for (double& v : mean) v /= static_cast<double>(models.size());
    return mean;
}

inline std::vector<double> predict_ensemble(const CvResult& cv, const FeatureMatrix& x) {
    return predict_ensemble(cv.models, x);
}

// Merges a search point into baseline params. Dimensions beyond the known
// four are rejected rather than silently dropped.
inline gbdt::GbdtParams apply_point(const gbdt::GbdtParams& base, const tpe::Point& point) {
    gbdt::GbdtParams params = base;
    for (const auto& [name, value] : point) {
        if (name == "learning_rate") {
            params.learning_rate = value;
        } else if (name == "l2_leaf_reg") {
            params.l2_leaf_reg = value;
        } else if (name == "n_trees") {
            params.n_trees = static_cast<int>(std::lround(value));
        } else if (name == "max_depth") {
            params.max_depth = static_cast<int>(std::lround(value));
        } else {
            fail("InvalidParams", "unknown search dimension '" + name + "'");
        }
    }
    return params;
}

struct TuneResult {
    gbdt::GbdtParams best_params;
    tpe::SearchResult search;
};

// The fold plan is fixed across trials (same cv seed) so objectives are
// directly comparable.
inline TuneResult tune(const FeatureMatrix& x, const tpe::SearchSpace& space,
                       std::size_t n_trials, int k, const tpe::TpeConfig& cfg,
                       const gbdt::GbdtParams& base, std::uint64_t cv_seed,
                       std::vector<tpe::Trial> initial_history = {},
                       const std::function<void(const tpe::Trial&)>& on_trial = nullptr) {
    auto objective = [&](const tpe::Point& point) {
        const auto params = apply_point(base, point);
        params.validate();
        return *cv_train(x, params, k, cv_seed).report.mean_logloss;
    };
    TuneResult result;
    result.search =
        tpe::minimize(objective, space, n_trials, cfg, std::move(initial_history), on_trial);
    result.best_params = apply_point(base, result.search.best_point);
    return result;
}

}  // namespace rankforge::trainer
