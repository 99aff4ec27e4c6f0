#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultra/errors.hpp"
#include "ultra/mdp.hpp"
#include "ultra/rng.hpp"

namespace ultra {

// Two-hidden-layer tanh MLP with a shared trunk and separate policy/value
// heads. Parameters live in one flat vector so the optimizer and the
// finite-difference checks can treat the network as a plain R^n function.
//
// Layout: W1[h x in], b1[h], W2[h x h], b2[h], Wp[out x h], bp[out],
//         Wv[1 x h], bv[1], (log_std[out] for the Gaussian head).

enum class PolicyHead { Categorical, Gaussian };

struct PolicyParams {
    std::string env_name;
    PolicyHead head = PolicyHead::Categorical;
    int obs_dim = 0;
    int out_dim = 0; // action arity or continuous action dimension
    int hidden = 64;
    std::uint64_t init_seed = 0;
    std::vector<double> theta;

    std::size_t size() const { return theta.size(); }

    std::size_t w1() const { return 0; }
    std::size_t b1() const { return w1() + static_cast<std::size_t>(hidden) * obs_dim; }
    std::size_t w2() const { return b1() + hidden; }
    std::size_t b2() const { return w2() + static_cast<std::size_t>(hidden) * hidden; }
    std::size_t wp() const { return b2() + hidden; }
    std::size_t bp() const { return wp() + static_cast<std::size_t>(out_dim) * hidden; }
    std::size_t wv() const { return bp() + out_dim; }
    std::size_t bv() const { return wv() + hidden; }
    std::size_t log_std() const { return bv() + 1; }
    std::size_t total() const {
        return log_std() + (head == PolicyHead::Gaussian ? out_dim : 0);
    }
};

// Scaled uniform fan-in initialization; zero initialization is available for
// the degenerate-output tests via gain = 0.
inline PolicyParams init_policy(const std::string& env_name, PolicyHead head, int obs_dim,
                                int out_dim, int hidden, std::uint64_t seed,
                                double gain = 1.0) {
    PolicyParams p;
    p.env_name = env_name;
    p.head = head;
    p.obs_dim = obs_dim;
    p.out_dim = out_dim;
    p.hidden = hidden;
    p.init_seed = seed;
    p.theta.assign(p.total(), 0.0);
    RngStream rng(seed, 0x1417);
    auto fill = [&](std::size_t offset, std::size_t count, int fan_in, double scale) {
        double bound = scale * std::sqrt(3.0 / std::max(fan_in, 1));
        for (std::size_t i = 0; i < count; ++i)
            p.theta[offset + i] = gain * bound * (2.0 * rng.next_double() - 1.0);
    };
    fill(p.w1(), static_cast<std::size_t>(hidden) * obs_dim, obs_dim, 1.0);
    fill(p.w2(), static_cast<std::size_t>(hidden) * hidden, hidden, 1.0);
    // small policy head keeps the initial distribution near-uniform
    fill(p.wp(), static_cast<std::size_t>(out_dim) * hidden, hidden, 0.01);
    fill(p.wv(), hidden, hidden, 1.0);
    return p;
}

struct Distribution {
    PolicyHead head = PolicyHead::Categorical;
    std::vector<double> probs;  // categorical
    std::vector<double> logits; // categorical (pre-softmax, kept for grads)
    std::vector<double> mean;   // gaussian
    std::vector<double> log_std;
};

struct ForwardCache {
    std::vector<double> obs;
    std::vector<double> a1; // tanh activations, layer 1
    std::vector<double> a2; // tanh activations, layer 2
};

struct ForwardResult {
    Distribution dist;
    double value = 0.0;
    ForwardCache cache;
};

inline ForwardResult policy_forward(const PolicyParams& p, const std::vector<double>& obs) {
    if (static_cast<int>(obs.size()) != p.obs_dim)
        throw ShapeMismatchError("policy_forward: observation dimension " +
                                 std::to_string(obs.size()) + " != " + std::to_string(p.obs_dim));
    ForwardResult r;
    r.cache.obs = obs;
    const double* t = p.theta.data();
    r.cache.a1.resize(p.hidden);
    for (int i = 0; i < p.hidden; ++i) {
        double z = t[p.b1() + i];
        const double* row = t + p.w1() + static_cast<std::size_t>(i) * p.obs_dim;
        for (int j = 0; j < p.obs_dim; ++j) z += row[j] * obs[j];
        r.cache.a1[i] = std::tanh(z);
    }
    r.cache.a2.resize(p.hidden);
    for (int i = 0; i < p.hidden; ++i) {
        double z = t[p.b2() + i];
        const double* row = t + p.w2() + static_cast<std::size_t>(i) * p.hidden;
        for (int j = 0; j < p.hidden; ++j) z += row[j] * r.cache.a1[j];
        r.cache.a2[i] = std::tanh(z);
    }
    std::vector<double> out(p.out_dim);
    for (int i = 0; i < p.out_dim; ++i) {
        double z = t[p.bp() + i];
        const double* row = t + p.wp() + static_cast<std::size_t>(i) * p.hidden;
        for (int j = 0; j < p.hidden; ++j) z += row[j] * r.cache.a2[j];
        out[i] = z;
    }
    {
        double z = t[p.bv()];
        const double* row = t + p.wv();
        for (int j = 0; j < p.hidden; ++j) z += row[j] * r.cache.a2[j];
        r.value = z;
    }
    r.dist.head = p.head;
    if (p.head == PolicyHead::Categorical) {
        r.dist.logits = out;
        double maxl = *std::max_element(out.begin(), out.end());
        double total = 0.0;
        r.dist.probs.resize(p.out_dim);
        for (int i = 0; i < p.out_dim; ++i) {
            r.dist.probs[i] = std::exp(out[i] - maxl);
            total += r.dist.probs[i];
        }
        for (double& v : r.dist.probs) v /= total;
    } else {
        r.dist.mean = out;
        r.dist.log_std.assign(t + p.log_std(), t + p.log_std() + p.out_dim);
    }
    return r;
}

inline double log_prob(const Distribution& d, const Action& a) {
    if (d.head == PolicyHead::Categorical) {
        return std::log(std::max(d.probs.at(a.index), 1e-300));
    }
    double lp = 0.0;
    for (std::size_t k = 0; k < d.mean.size(); ++k) {
        double sigma = std::exp(d.log_std[k]);
        double z = (a.vec[k] - d.mean[k]) / sigma;
        lp += -0.5 * z * z - d.log_std[k] - 0.5 * std::log(2.0 * 3.14159265358979323846);
    }
    return lp;
}

inline double entropy(const Distribution& d) {
    if (d.head == PolicyHead::Categorical) {
        double h = 0.0;
        for (double p : d.probs)
            if (p > 0.0) h -= p * std::log(p);
        return h;
    }
    double h = 0.0;
    for (double ls : d.log_std) h += ls + 0.5 * std::log(2.0 * 3.14159265358979323846 * 2.718281828459045235);
    return h;
}

struct SampledAction {
    Action action;
    double log_prob = 0.0;
};

inline SampledAction sample_action(const Distribution& d, RngStream& rng) {
    SampledAction s;
    if (d.head == PolicyHead::Categorical) {
        int idx = static_cast<int>(rng.next_categorical(d.probs));
        s.action = Action::discrete(idx, static_cast<int>(d.probs.size()));
    } else {
        std::vector<double> v(d.mean.size());
        for (std::size_t k = 0; k < v.size(); ++k)
            v[k] = d.mean[k] + std::exp(d.log_std[k]) * rng.next_normal();
        s.action = Action::continuous(std::move(v));
    }
    s.log_prob = log_prob(d, s.action);
    return s;
}

// Greedy evaluation action: distribution mode (argmax / mean).
inline Action mode_action(const Distribution& d) {
    if (d.head == PolicyHead::Categorical) {
        int best = 0;
        for (std::size_t i = 1; i < d.probs.size(); ++i)
            if (d.probs[i] > d.probs[best]) best = static_cast<int>(i);
        return Action::discrete(best, static_cast<int>(d.probs.size()));
    }
    return Action::continuous(d.mean);
}

// --- checkpoint io ----------------------------------------------------------

inline void save_checkpoint(const std::string& path, const PolicyParams& p,
                            const Json& config_echo = Json::object()) {
    Json j;
    j["format_version"] = 1;
    j["env"] = p.env_name;
    j["head"] = p.head == PolicyHead::Categorical ? "categorical" : "gaussian";
    j["obs_dim"] = p.obs_dim;
    j["out_dim"] = p.out_dim;
    j["hidden"] = p.hidden;
    j["init_seed"] = p.init_seed;
    j["config"] = config_echo;
    j["params"] = p.theta;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_checkpoint: cannot open " + path);
    out << j.dump() << "\n";
}

inline PolicyParams load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_checkpoint: cannot open " + path);
    Json j = Json::parse(in);
    PolicyParams p;
    p.env_name = j.at("env").get<std::string>();
    p.head = j.at("head").get<std::string>() == "categorical" ? PolicyHead::Categorical
                                                              : PolicyHead::Gaussian;
    p.obs_dim = j.at("obs_dim").get<int>();
    p.out_dim = j.at("out_dim").get<int>();
    p.hidden = j.at("hidden").get<int>();
    p.init_seed = j.at("init_seed").get<std::uint64_t>();
    p.theta = j.at("params").get<std::vector<double>>();
    if (p.theta.size() != p.total())
        throw ShapeMismatchError("load_checkpoint: parameter count mismatch in " + path);
    return p;
}

} // namespace ultra
