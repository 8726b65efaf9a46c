#pragma once

// Tree-structured Parzen Estimator for sequential hyperparameter search,
// plus a random-search baseline. Minimization is the canonical direction.
// suggest() is a pure function of (history, space, cfg): its generator is
// re-seeded from the config seed and the history length on every call.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "rankforge/errors.hpp"
#include "rankforge/rng.hpp"

namespace rankforge::tpe {

using Point = std::map<std::string, double>;

struct Uniform {
    double low = 0.0;
    double high = 1.0;
};

// sample u ~ Uniform(low, high), return round(exp(u)/q)*q
struct QLogUniform {
    double low = 0.0;
    double high = 1.0;
    double q = 1.0;

    long k_min() const { return std::max(1L, std::lround(std::exp(low) / q)); }
    long k_max() const { return std::lround(std::exp(high) / q); }
};

using Dimension = std::variant<Uniform, QLogUniform>;

struct SearchSpace {
    std::vector<std::pair<std::string, Dimension>> dims;

    void validate() const {
        for (const auto& [name, dim] : dims) {
            const double low = std::visit([](const auto& d) { return d.low; }, dim);
            const double high = std::visit([](const auto& d) { return d.high; }, dim);
            if (!(low < high)) fail("InvalidParams", "dimension '" + name + "': low must be < high");
            if (const auto* qd = std::get_if<QLogUniform>(&dim)) {
                if (!(qd->q > 0.0)) fail("InvalidParams", "dimension '" + name + "': q must be > 0");
                if (qd->k_min() > qd->k_max()) {
                    fail("InvalidParams", "dimension '" + name + "': empty quantized support");
                }
            }
        }
    }

    bool contains(const Point& point) const {
        if (point.size() != dims.size()) return false;
        for (const auto& [name, dim] : dims) {
            const auto it = point.find(name);
            if (it == point.end()) return false;
            const double v = it->second;
            if (const auto* ud = std::get_if<Uniform>(&dim)) {
                if (v < ud->low || v > ud->high) return false;
            } else {
                const auto& qd = std::get<QLogUniform>(dim);
                const long k = std::lround(v / qd.q);
                if (k < qd.k_min() || k > qd.k_max()) return false;
                if (std::abs(v - static_cast<double>(k) * qd.q) >
                    1e-9 * std::max(1.0, std::abs(v))) {
                    return false;
                }
            }
        }
        return true;
    }
};

enum class TrialStatus { complete, failed };

struct Trial {
    Point point;
    double objective = std::numeric_limits<double>::quiet_NaN();
    TrialStatus status = TrialStatus::failed;
};

struct TpeConfig {
    int n_startup = 20;
    double gamma = 0.25;
    int n_candidates = 24;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_startup < 1) fail("InvalidParams", "n_startup must be positive");
        if (!(gamma > 0.0 && gamma < 1.0)) fail("InvalidParams", "gamma must be in (0, 1)");
        if (n_candidates < 1) fail("InvalidParams", "n_candidates must be positive");
    }
};

namespace detail {

inline constexpr double kLogSqrt2Pi = 0.9189385332046727;  // log(sqrt(2*pi))

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); }

// Equal-weight mixture of Gaussians truncated to [low, high]: one component
// per observation plus a wide prior component at the domain midpoint.
// Bandwidths follow the adaptive rule: distance to the farther sorted
// neighbor (the prior mean counts as a neighbor), clipped to
// [(high-low)/min(100, 1+n_components), high-low].
class ParzenMixture {
public:
    ParzenMixture(const std::vector<double>& observations, double low, double high)
        : low_(low), high_(high) {
        const double width = high - low;
        const double prior_mu = 0.5 * (low + high);
        mus_ = observations;
        mus_.push_back(prior_mu);
        sigmas_.assign(mus_.size(), width);

        std::vector<double> sorted = mus_;
        std::sort(sorted.begin(), sorted.end());
        const double floor = width / std::min(100.0, 1.0 + static_cast<double>(mus_.size()));
        for (std::size_t i = 0; i + 1 < mus_.size(); ++i) {  // last entry is the prior, sigma stays wide
            const auto pos = static_cast<std::size_t>(
                std::lower_bound(sorted.begin(), sorted.end(), mus_[i]) - sorted.begin());
            double sigma = 0.0;
            if (pos > 0) sigma = std::max(sigma, mus_[i] - sorted[pos - 1]);
            if (pos + 1 < sorted.size()) sigma = std::max(sigma, sorted[pos + 1] - mus_[i]);
            sigmas_[i] = std::clamp(sigma, floor, width);
        }
        log_weight_ = -std::log(static_cast<double>(mus_.size()));
        log_trunc_.resize(mus_.size());
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double z = normal_cdf((high_ - mus_[i]) / sigmas_[i]) -
                             normal_cdf((low_ - mus_[i]) / sigmas_[i]);
            log_trunc_[i] = std::log(std::max(z, 1e-300));
        }
    }

    double sample(Rng& rng) const {
        const std::size_t i = rng.below(mus_.size());
        for (int attempt = 0; attempt < 100; ++attempt) {
            const double x = mus_[i] + sigmas_[i] * rng.normal();
            if (x >= low_ && x <= high_) return x;
        }
        return std::clamp(mus_[i], low_, high_);
    }

    double log_pdf(double x) const {
        if (x < low_ || x > high_) return -std::numeric_limits<double>::infinity();
        double max_term = -std::numeric_limits<double>::infinity();
        std::vector<double> terms(mus_.size());
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double z = (x - mus_[i]) / sigmas_[i];
            terms[i] = log_weight_ - 0.5 * z * z - std::log(sigmas_[i]) - kLogSqrt2Pi -
                       log_trunc_[i];
            max_term = std::max(max_term, terms[i]);
        }
        double sum = 0.0;
        for (const double t : terms) sum += std::exp(t - max_term);
        return max_term + std::log(sum);
    }

    // mass of [a, b] within the truncated mixture
    double log_mass(double a, double b) const {
        a = std::max(a, low_);
        b = std::min(b, high_);
        if (!(a < b)) return std::log(1e-300);
        double mass = 0.0;
        for (std::size_t i = 0; i < mus_.size(); ++i) {
            const double hi = normal_cdf((b - mus_[i]) / sigmas_[i]);
            const double lo = normal_cdf((a - mus_[i]) / sigmas_[i]);
            mass += std::exp(log_weight_) * (hi - lo) * std::exp(-log_trunc_[i]);
        }
        return std::log(std::max(mass, 1e-300));
    }

private:
    double low_, high_;
    std::vector<double> mus_, sigmas_, log_trunc_;
    double log_weight_ = 0.0;
};

inline double sample_prior_dim(const Dimension& dim, Rng& rng) {
    if (const auto* ud = std::get_if<Uniform>(&dim)) {
        return rng.uniform(ud->low, ud->high);
    }
    const auto& qd = std::get<QLogUniform>(dim);
    const double u = rng.uniform(qd.low, qd.high);
    const long k = std::clamp(std::lround(std::exp(u) / qd.q), qd.k_min(), qd.k_max());
    return static_cast<double>(k) * qd.q;
}

inline std::uint64_t call_seed(const TpeConfig& cfg, std::size_t history_size) {
    return mix64(mix64(cfg.seed + 0x9e3779b97f4a7c15ull) ^ (history_size + 1));
}

}  // namespace detail

inline Point sample_prior(const SearchSpace& space, Rng& rng) {
    Point point;
    for (const auto& [name, dim] : space.dims) point[name] = detail::sample_prior_dim(dim, rng);
    return point;
}

// Best ceil(gamma*n) complete trials by ascending objective, then the rest.
// Ties keep history order.
inline std::pair<std::vector<Trial>, std::vector<Trial>> split_good_bad(
    const std::vector<Trial>& history, double gamma) {
    std::vector<Trial> complete;
    for (const auto& t : history) {
        if (t.status == TrialStatus::complete && std::isfinite(t.objective)) {
            complete.push_back(t);
        }
    }
    std::stable_sort(complete.begin(), complete.end(),
                     [](const Trial& a, const Trial& b) { return a.objective < b.objective; });
    const auto n_good = static_cast<std::size_t>(
        std::ceil(gamma * static_cast<double>(complete.size())));
    std::vector<Trial> good(complete.begin(), complete.begin() + n_good);
    std::vector<Trial> bad(complete.begin() + n_good, complete.end());
    return {std::move(good), std::move(bad)};
}

inline Point suggest(const std::vector<Trial>& history, const SearchSpace& space,
                     const TpeConfig& cfg) {
    space.validate();
    cfg.validate();
    if (space.dims.empty()) fail("InvalidParams", "search space has no dimensions");
    Rng rng(detail::call_seed(cfg, history.size()));

    std::size_t n_complete = 0;
    for (const auto& t : history) {
        if (t.status == TrialStatus::complete && std::isfinite(t.objective)) ++n_complete;
    }
    if (n_complete < static_cast<std::size_t>(cfg.n_startup)) return sample_prior(space, rng);

    const auto [good, bad] = split_good_bad(history, cfg.gamma);

    // Per-dimension density pairs; quantized dims are modeled in log domain.
    struct DimModel {
        detail::ParzenMixture l, g;
    };
    std::vector<DimModel> models;
    models.reserve(space.dims.size());
    for (const auto& [name, dim] : space.dims) {
        const bool quantized = std::holds_alternative<QLogUniform>(dim);
        const double low = std::visit([](const auto& d) { return d.low; }, dim);
        const double high = std::visit([](const auto& d) { return d.high; }, dim);
        auto values = [&](const std::vector<Trial>& trials) {
            std::vector<double> out;
            out.reserve(trials.size());
            for (const auto& t : trials) {
                const double v = t.point.at(name);
                out.push_back(quantized ? std::clamp(std::log(v), low, high) : v);
            }
            return out;
        };
        models.push_back({detail::ParzenMixture(values(good), low, high),
                          detail::ParzenMixture(values(bad), low, high)});
    }

    Point best_point;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int c = 0; c < cfg.n_candidates; ++c) {
        Point candidate;
        double score = 0.0;
        std::size_t d = 0;
        for (const auto& [name, dim] : space.dims) {
            const auto& model = models[d++];
            if (const auto* ud = std::get_if<Uniform>(&dim)) {
                const double x = model.l.sample(rng);
                candidate[name] = x;
                score += model.l.log_pdf(x) - model.g.log_pdf(x);
            } else {
                const auto& qd = std::get<QLogUniform>(dim);
                const double u = model.l.sample(rng);
                const long k = std::clamp(std::lround(std::exp(u) / qd.q), qd.k_min(), qd.k_max());
                candidate[name] = static_cast<double>(k) * qd.q;
                // density of a quantized point is its rounding interval's mass
                const double a = std::log(qd.q * (static_cast<double>(k) - 0.5));
                const double b = std::log(qd.q * (static_cast<double>(k) + 0.5));
                score += model.l.log_mass(a, b) - model.g.log_mass(a, b);
            }
        }
        if (score > best_score) {
            best_score = score;
            best_point = std::move(candidate);
        }
    }
    return best_point;
}

struct SearchResult {
    Point best_point;
    double best_value = std::numeric_limits<double>::quiet_NaN();
    std::vector<Trial> trials;
};

namespace detail {

inline SearchResult finish(std::vector<Trial> trials) {
    SearchResult result;
    result.trials = std::move(trials);
    const Trial* best = nullptr;
    for (const auto& t : result.trials) {
        if (t.status != TrialStatus::complete || !std::isfinite(t.objective)) continue;
        if (!best || t.objective < best->objective) best = &t;
    }
    if (!best) fail("AllTrialsFailed", "no trial completed successfully");
    result.best_point = best->point;
    result.best_value = best->objective;
    return result;
}

inline Trial run_trial(const std::function<double(const Point&)>& objective, Point point) {
    Trial trial;
    trial.point = std::move(point);
    try {
        const double value = objective(trial.point);
        if (std::isfinite(value)) {
            trial.objective = value;
            trial.status = TrialStatus::complete;
        }
    } catch (const std::exception&) {
        // recorded as failed
    }
    return trial;
}

}  // namespace detail

// Runs trials until the history holds n_trials entries; initial_history seeds
// resumption. on_trial (optional) observes each new trial as it completes.
inline SearchResult minimize(const std::function<double(const Point&)>& objective,
                             const SearchSpace& space, std::size_t n_trials,
                             const TpeConfig& cfg, std::vector<Trial> initial_history = {},
                             const std::function<void(const Trial&)>& on_trial = nullptr) {
    space.validate();
    cfg.validate();
    std::vector<Trial> history = std::move(initial_history);
    while (history.size() < n_trials) {
        Trial trial = detail::run_trial(objective, suggest(history, space, cfg));
        if (on_trial) on_trial(trial);
        history.push_back(std::move(trial));
    }
    return detail::finish(std::move(history));
}

inline SearchResult random_search(const std::function<double(const Point&)>& objective,
                                  const SearchSpace& space, std::size_t n_trials,
                                  std::uint64_t seed) {
    space.validate();
    Rng rng(seed);
    std::vector<Trial> history;
    history.reserve(n_trials);
    for (std::size_t i = 0; i < n_trials; ++i) {
        history.push_back(detail::run_trial(objective, sample_prior(space, rng)));
    }
    return detail::finish(std::move(history));
}

}  // namespace rankforge::tpe
