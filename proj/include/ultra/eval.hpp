#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "ultra/env.hpp"
#include "ultra/policy.hpp"

namespace ultra {

struct EvalConfig {
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int episodes_per_seed = 100;
};

struct EvalResult {
    std::vector<double> per_seed_means;
    std::vector<double> episode_returns; // raw, all seeds pooled
    double mean = 0.0;
    double stddev = 0.0; // population std over pooled episode returns
    double duration_seconds = 0.0;
};

namespace detail {

inline double run_episode(Env& env, const PolicyParams& params, std::uint64_t seed) {
    State s = env.reset(seed);
    double total = 0.0;
    while (true) {
        ForwardResult fr = policy_forward(params, env.observe(s));
        StepResult res = env.step(mode_action(fr.dist));
        total += res.reward;
        s = res.state;
        if (res.done) return total;
    }
}

} // namespace detail

// Deterministic evaluation: mode actions only, episode seeds derived from the
// configured seed list. Does not mutate the policy.
inline EvalResult evaluate(Env& env, const PolicyParams& params, const EvalConfig& cfg) {
    auto t0 = std::chrono::steady_clock::now();
    EvalResult out;
    for (std::uint64_t seed : cfg.seeds) {
        RngStream episode_seeds(seed, 0xEAA1);
        double sum = 0.0;
        for (int e = 0; e < cfg.episodes_per_seed; ++e) {
            double ret = detail::run_episode(env, params, episode_seeds.next_u64());
            out.episode_returns.push_back(ret);
            sum += ret;
        }
        out.per_seed_means.push_back(sum / cfg.episodes_per_seed);
    }
    double n = static_cast<double>(out.episode_returns.size());
    out.mean = std::accumulate(out.episode_returns.begin(), out.episode_returns.end(), 0.0) / n;
    double var = 0.0;
    for (double r : out.episode_returns) var += (r - out.mean) * (r - out.mean);
    out.stddev = std::sqrt(var / n);
    out.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

struct Comparison {
    double candidate = 0.0;
    double baseline = 0.0;
    double improvement = 0.0; // percent, or absolute difference at baseline 0
    bool relative = true;
};

// Percent improvement 100 * (a - b) / |b|; when the baseline is exactly zero
// the relative form is undefined, so fall back to the absolute difference.
inline Comparison compare(double candidate, double baseline) {
    Comparison c;
    c.candidate = candidate;
    c.baseline = baseline;
    if (baseline == 0.0) {
        c.relative = false;
        c.improvement = candidate - baseline;
    } else {
        c.improvement = 100.0 * (candidate - baseline) / std::abs(baseline);
    }
    return c;
}

} // namespace ultra
