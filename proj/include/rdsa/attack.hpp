#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <thread>
#include <vector>

#include "rdsa/dataset.hpp"
#include "rdsa/error.hpp"
#include "rdsa/histogram.hpp"
#include "rdsa/rng.hpp"

namespace rdsa {

// Anything with a predict(features) -> class method. The attacks are
// black-box: this is the only model surface RDSA touches, and instrumented
// wrappers (query counters) satisfy the same concept.
template <typename M>
concept Predictor = requires(const M& m, std::span<const double> x) {
    { m.predict(x) } -> std::convertible_to<int>;
};

template <typename M>
concept GradientModel = Predictor<M> && requires(const M& m, std::span<const double> x, int label) {
    { m.input_gradient(x, label) } -> std::convertible_to<std::vector<double>>;
};

struct AttackConfig {
    std::size_t n_vars = 1;        // features resampled per input
    std::size_t max_attempts = 100;  // shuffle tries per input before giving up
    std::vector<std::size_t> shuffle_scope;  // eligible feature indices
    std::uint64_t seed = 0;
    bool reselect_vars_per_attempt = false;
};

struct AttackOutcome {
    std::size_t row = 0;
    std::vector<double> original;
    std::optional<std::vector<double>> adversary;  // present iff succeeded
    std::optional<std::vector<double>> last_attempt;  // final shuffled vector of a failed attack
    std::size_t attempts_used = 0;
    int original_label = 0;  // true label == predicted label of the clean input
    std::optional<int> adversarial_label;
    bool succeeded = false;
};

struct AttackSetResult {
    std::vector<AttackOutcome> outcomes;      // one per correctly classified input, row order
    std::vector<std::size_t> skipped_rows;    // inputs the model already misclassified
};

struct GradientAttackConfig {
    double epsilon = 0.01;
    std::size_t steps = 100;
    // optional per-feature bounds {lo, hi}
    std::optional<std::pair<std::vector<double>, std::vector<double>>> clip;
};

// Uniform draw of n_vars distinct indices from scope.
inline std::vector<std::size_t> select_shuffle_vars(std::span<const std::size_t> scope,
                                                    std::size_t n_vars, Rng& rng) {
    if (n_vars > scope.size())
        throw Error(ErrorKind::config, ErrorCode::too_many_vars,
                    "cannot shuffle " + std::to_string(n_vars) + " of " +
                        std::to_string(scope.size()) + " eligible features");
    std::vector<std::size_t> pool(scope.begin(), scope.end());
    for (std::size_t i = 0; i < n_vars; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(pool.size() - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(n_vars);
    return pool;
}

namespace detail {

inline void validate_attack_config(const AttackConfig& cfg, const HistogramSet& hists,
                                   std::size_t num_features) {
    if (cfg.shuffle_scope.empty())
        throw Error(ErrorKind::config, ErrorCode::scope_mismatch, "shuffle scope is empty");
    if (cfg.n_vars > cfg.shuffle_scope.size())
        throw Error(ErrorKind::config, ErrorCode::too_many_vars,
                    "n_vars " + std::to_string(cfg.n_vars) + " exceeds scope size " +
                        std::to_string(cfg.shuffle_scope.size()));
    for (std::size_t f : cfg.shuffle_scope)
        if (f >= num_features)
            throw Error(ErrorKind::config, ErrorCode::scope_mismatch,
                        "scope feature " + std::to_string(f) + " out of range");
    if (!hists.covers(cfg.shuffle_scope))
        throw Error(ErrorKind::config, ErrorCode::scope_mismatch,
                    "histogram set does not cover the shuffle scope");
}

// Splits [0, n) into contiguous chunks and runs fn(begin, end) on each,
// using `workers` threads (1 = inline).
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t workers, Fn&& fn) {
    workers = std::max<std::size_t>(workers, 1);
    workers = std::min(workers, n == 0 ? 1 : n);
    if (workers <= 1) {
        fn(std::size_t{0}, n);
        return;
    }
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        const std::size_t begin = w * chunk;
        const std::size_t end = std::min(n, begin + chunk);
        if (begin >= end) break;
        pool.emplace_back([&fn, begin, end] { fn(begin, end); });
    }
    for (auto& t : pool) t.join();
}

}  // namespace detail

// One RDSA attack: resample the selected features of the working vector from
// their empirical distributions, query the model, stop on the first label
// flip or after max_attempts queries. The selected variables are drawn once
// and held fixed across attempts unless reselect_vars_per_attempt is set.
// Precondition: the model predicts true_label on x.
template <Predictor M>
AttackOutcome rdsa_attack_one(std::span<const double> x, int true_label, const M& model,
                              const HistogramSet& hists, const AttackConfig& cfg, Rng& rng) {
    detail::validate_attack_config(cfg, hists, x.size());

    AttackOutcome outcome;
    outcome.original.assign(x.begin(), x.end());
    outcome.original_label = true_label;

    std::vector<std::size_t> vars = select_shuffle_vars(cfg.shuffle_scope, cfg.n_vars, rng);
    std::vector<double> adv(x.begin(), x.end());
    for (std::size_t attempt = 1; attempt <= cfg.max_attempts; ++attempt) {
        if (cfg.reselect_vars_per_attempt && attempt > 1)
            vars = select_shuffle_vars(cfg.shuffle_scope, cfg.n_vars, rng);
        for (std::size_t v : vars) adv[v] = sample_value(hists.at(v), rng);
        const int predicted = model.predict(adv);
        outcome.attempts_used = attempt;
        if (predicted != true_label) {
            outcome.succeeded = true;
            outcome.adversary = adv;
            outcome.adversarial_label = predicted;
            return outcome;
        }
    }
    outcome.last_attempt = std::move(adv);
    return outcome;
}

// Attacks every correctly classified input of d. Each input owns an RNG
// stream derived from (cfg.seed, row), so the outcome list is identical for
// any worker count and any scheduling order.
template <Predictor M>
AttackSetResult rdsa_attack_set(const Dataset& d, const M& model, const HistogramSet& hists,
                                const AttackConfig& cfg, std::size_t workers = 1) {
    detail::validate_attack_config(cfg, hists, d.num_features());

    const std::size_t n = d.size();
    std::vector<std::optional<AttackOutcome>> slots(n);
    std::vector<char> skipped(n, 0);

    detail::parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto x = d.features.row(r);
            if (model.predict(x) != d.labels[r]) {
                skipped[r] = 1;
                continue;
            }
            Rng rng(derive_seed(cfg.seed, r));
            AttackOutcome o = rdsa_attack_one(x, d.labels[r], model, hists, cfg, rng);
            o.row = r;
            slots[r] = std::move(o);
        }
    });

    AttackSetResult result;
    for (std::size_t r = 0; r < n; ++r) {
        if (skipped[r]) result.skipped_rows.push_back(r);
        if (slots[r]) result.outcomes.push_back(std::move(*slots[r]));
    }
    return result;
}

// Iterative sign-gradient baseline: x <- x + eps * sign(dL/dx), optional
// clipping, early stop on label flip. steps == 1 is the single-step variant.
template <GradientModel M>
AttackOutcome gradient_attack_one(std::span<const double> x, int true_label, const M& model,
                                  const GradientAttackConfig& cfg) {
    if (cfg.clip) {
        if (cfg.clip->first.size() != x.size() || cfg.clip->second.size() != x.size())
            throw Error(ErrorKind::config, ErrorCode::dimension_mismatch,
                        "clip bounds must match the feature count");
    }
    AttackOutcome outcome;
    outcome.original.assign(x.begin(), x.end());
    outcome.original_label = true_label;

    std::vector<double> adv(x.begin(), x.end());
    for (std::size_t step = 1; step <= cfg.steps; ++step) {
        const std::vector<double> grad = model.input_gradient(adv, true_label);
        for (std::size_t j = 0; j < adv.size(); ++j) {
            const double s = grad[j] > 0.0 ? 1.0 : (grad[j] < 0.0 ? -1.0 : 0.0);
            adv[j] += cfg.epsilon * s;
            if (cfg.clip) adv[j] = std::clamp(adv[j], cfg.clip->first[j], cfg.clip->second[j]);
        }
        const int predicted = model.predict(adv);
        outcome.attempts_used = step;
        if (predicted != true_label) {
            outcome.succeeded = true;
            outcome.adversary = adv;
            outcome.adversarial_label = predicted;
            return outcome;
        }
    }
    outcome.last_attempt = std::move(adv);
    return outcome;
}

template <GradientModel M>
AttackSetResult gradient_attack_set(const Dataset& d, const M& model,
                                    const GradientAttackConfig& cfg, std::size_t workers = 1) {
    const std::size_t n = d.size();
    std::vector<std::optional<AttackOutcome>> slots(n);
    std::vector<char> skipped(n, 0);

    detail::parallel_chunks(n, workers, [&](std::size_t begin, std::size_t end) {
        for (std::size_t r = begin; r < end; ++r) {
            const auto x = d.features.row(r);
            if (model.predict(x) != d.labels[r]) {
                skipped[r] = 1;
                continue;
            }
            AttackOutcome o = gradient_attack_one(x, d.labels[r], model, cfg);
            o.row = r;
            slots[r] = std::move(o);
        }
    });

    AttackSetResult result;
    for (std::size_t r = 0; r < n; ++r) {
        if (skipped[r]) result.skipped_rows.push_back(r);
        if (slots[r]) result.outcomes.push_back(std::move(*slots[r]));
    }
    return result;
}

// Adversarial set as CSV: the source schema plus bookkeeping columns.
// Failed attacks keep their original feature values and an empty
// adversarial_label cell.
void write_adversarial_csv(const AttackSetResult& result, const Dataset& source,
                           const std::filesystem::path& path);

}  // namespace rdsa
