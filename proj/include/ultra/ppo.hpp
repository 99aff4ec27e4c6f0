#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "ultra/env.hpp"
#include "ultra/gae.hpp"
#include "ultra/policy.hpp"

namespace ultra {

struct PpoConfig {
    double clip_epsilon = 0.2;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double learning_rate = 1e-4;
    int minibatch_size = 64;
    int epochs = 4;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
    bool normalize_advantages = true;
    int hidden = 64;

    void validate() const {
        if (clip_epsilon <= 0.0 || clip_epsilon > 1.0)
            throw ConfigError("ppo: clip epsilon must be in (0,1]");
        if (gae_lambda <= 0.0 || gae_lambda > 1.0)
            throw ConfigError("ppo: gae lambda must be in (0,1]");
        if (gamma < 0.0 || gamma > 1.0) throw ConfigError("ppo: gamma must be in [0,1]");
        if (learning_rate <= 0.0) throw ConfigError("ppo: learning rate must be positive");
        if (minibatch_size <= 0) throw ConfigError("ppo: batch size must be positive");
    }
};

struct RolloutBatch {
    std::vector<std::vector<double>> observations;
    std::vector<Action> actions; // executed actions
    std::vector<double> log_probs;
    std::vector<double> rewards; // env + shaping
    std::vector<double> values;
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return observations.size(); }
};

struct LossStats {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double total = 0.0;
};

// Mean PPO loss over the given indices, with pre-computed (already
// normalized) advantages supplied alongside. Pure function of the parameter
// vector; the finite-difference oracle re-evaluates it under perturbation.
inline LossStats ppo_loss(const PolicyParams& params, const RolloutBatch& batch,
                          const std::vector<std::size_t>& indices,
                          const std::vector<double>& advantages, const PpoConfig& cfg) {
    LossStats stats;
    for (std::size_t pos = 0; pos < indices.size(); ++pos) {
        std::size_t i = indices[pos];
        ForwardResult fr = policy_forward(params, batch.observations[i]);
        double logp = log_prob(fr.dist, batch.actions[i]);
        double ratio = std::exp(logp - batch.log_probs[i]);
        double adv = advantages[pos];
        double surr1 = ratio * adv;
        double clipped = std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
        double surr2 = clipped * adv;
        stats.policy_loss += -std::min(surr1, surr2);
        double verr = fr.value - batch.returns[i];
        stats.value_loss += 0.5 * verr * verr;
        stats.entropy += entropy(fr.dist);
    }
    double n = static_cast<double>(indices.size());
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.total = stats.policy_loss + cfg.value_coef * stats.value_loss -
                  cfg.entropy_coef * stats.entropy;
    return stats;
}

// Analytic gradient of ppo_loss via backprop through the shared trunk.
inline LossStats ppo_loss_grad(const PolicyParams& params, const RolloutBatch& batch,
                               const std::vector<std::size_t>& indices,
                               const std::vector<double>& advantages, const PpoConfig& cfg,
                               std::vector<double>& grad) {
    grad.assign(params.size(), 0.0);
    LossStats stats;
    const double n = static_cast<double>(indices.size());
    const double* t = params.theta.data();
    const int h = params.hidden;
    const int od = params.out_dim;

    std::vector<double> g_out(od), d_a2(h), d_z2(h), d_a1(h), d_z1(h);
    for (std::size_t pos = 0; pos < indices.size(); ++pos) {
        std::size_t i = indices[pos];
        ForwardResult fr = policy_forward(params, batch.observations[i]);
        const auto& c = fr.cache;
        double logp = log_prob(fr.dist, batch.actions[i]);
        double ratio = std::exp(logp - batch.log_probs[i]);
        double adv = advantages[pos];
        double surr1 = ratio * adv;
        double clipped = std::clamp(ratio, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
        double surr2 = clipped * adv;
        stats.policy_loss += -std::min(surr1, surr2);
        double verr = fr.value - batch.returns[i];
        stats.value_loss += 0.5 * verr * verr;
        double ent = entropy(fr.dist);
        stats.entropy += ent;

        // d(loss)/d(logp): zero when the clip binds
        double c_lp = (surr1 <= surr2) ? -adv * ratio / n : 0.0;
        double g_value = cfg.value_coef * verr / n;

        if (params.head == PolicyHead::Categorical) {
            int a = batch.actions[i].index;
            for (int j = 0; j < od; ++j) {
                double p = fr.dist.probs[j];
                double dlogp = (j == a ? 1.0 : 0.0) - p;
                double dent = -p * (std::log(std::max(p, 1e-300)) + ent);
                g_out[j] = c_lp * dlogp - cfg.entropy_coef * dent / n;
            }
        } else {
            for (int k = 0; k < od; ++k) {
                double sigma = std::exp(fr.dist.log_std[k]);
                double z = (batch.actions[i].vec[k] - fr.dist.mean[k]) / sigma;
                g_out[k] = c_lp * z / sigma;
                // log-std gradient: policy term plus entropy bonus (dH/dlogstd = 1)
                grad[params.log_std() + k] +=
                    c_lp * (z * z - 1.0) - cfg.entropy_coef / n;
            }
        }

        for (int j = 0; j < h; ++j) {
            double acc = g_value * t[params.wv() + j];
            for (int i2 = 0; i2 < od; ++i2)
                acc += g_out[i2] * t[params.wp() + static_cast<std::size_t>(i2) * h + j];
            d_a2[j] = acc;
            d_z2[j] = acc * (1.0 - c.a2[j] * c.a2[j]);
        }
        for (int i2 = 0; i2 < od; ++i2) {
            grad[params.bp() + i2] += g_out[i2];
            double* row = grad.data() + params.wp() + static_cast<std::size_t>(i2) * h;
            for (int j = 0; j < h; ++j) row[j] += g_out[i2] * c.a2[j];
        }
        grad[params.bv()] += g_value;
        for (int j = 0; j < h; ++j) grad[params.wv() + j] += g_value * c.a2[j];

        for (int k = 0; k < h; ++k) {
            double acc = 0.0;
            for (int j = 0; j < h; ++j)
                acc += d_z2[j] * t[params.w2() + static_cast<std::size_t>(j) * h + k];
            d_a1[k] = acc;
            d_z1[k] = acc * (1.0 - c.a1[k] * c.a1[k]);
        }
        for (int j = 0; j < h; ++j) {
            grad[params.b2() + j] += d_z2[j];
            double* row = grad.data() + params.w2() + static_cast<std::size_t>(j) * h;
            for (int k = 0; k < h; ++k) row[k] += d_z2[j] * c.a1[k];
        }
        for (int k = 0; k < h; ++k) {
            grad[params.b1() + k] += d_z1[k];
            double* row = grad.data() + params.w1() + static_cast<std::size_t>(k) * params.obs_dim;
            for (int m = 0; m < params.obs_dim; ++m) row[m] += d_z1[k] * c.obs[m];
        }
    }
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.total = stats.policy_loss + cfg.value_coef * stats.value_loss -
                  cfg.entropy_coef * stats.entropy;
    return stats;
}

// Adaptive-moment optimizer with fixed defaults (beta1 0.9, beta2 0.999,
// eps 1e-8); persists across updates within a training run.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;

    void apply(std::vector<double>& theta, const std::vector<double>& grad, double lr) {
        if (m.empty()) {
            m.assign(theta.size(), 0.0);
            v.assign(theta.size(), 0.0);
        }
        ++step;
        const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
        double bc1 = 1.0 - std::pow(b1, step);
        double bc2 = 1.0 - std::pow(b2, step);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
            v[i] = b2 * v[i] + (1.0 - b2) * grad[i] * grad[i];
            theta[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
        }
    }
};

namespace detail {
inline void shuffle_indices(std::vector<std::size_t>& idx, RngStream& rng) {
    for (std::size_t i = idx.size(); i > 1; --i)
        std::swap(idx[i - 1], idx[rng.next_below(i)]);
}
} // namespace detail

// Minibatched clipped-surrogate update. Advantages are normalized per
// minibatch (mean 0, std 1) when enabled.
inline LossStats ppo_update(PolicyParams& params, const RolloutBatch& batch,
                            const PpoConfig& cfg, AdamState& opt, RngStream& shuffle_rng) {
    if (batch.size() == 0) throw ConfigError("ppo_update: empty batch");
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), 0);
    LossStats last;
    std::vector<double> grad;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        detail::shuffle_indices(order, shuffle_rng);
        for (std::size_t start = 0; start < order.size();
             start += static_cast<std::size_t>(cfg.minibatch_size)) {
            std::size_t end = std::min(order.size(),
                                       start + static_cast<std::size_t>(cfg.minibatch_size));
            std::vector<std::size_t> mb(order.begin() + start, order.begin() + end);
            std::vector<double> adv(mb.size());
            for (std::size_t k = 0; k < mb.size(); ++k) adv[k] = batch.advantages[mb[k]];
            if (cfg.normalize_advantages && mb.size() > 1) {
                double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / adv.size();
                double var = 0.0;
                for (double a : adv) var += (a - mean) * (a - mean);
                double stddev = std::sqrt(var / adv.size());
                for (double& a : adv) a = (a - mean) / (stddev + 1e-8);
            }
            last = ppo_loss_grad(params, batch, mb, adv, cfg, grad);
            for (double g : grad)
                if (!std::isfinite(g))
                    throw NonFiniteGradientError(
                        "ppo_update: non-finite gradient (loss " + std::to_string(last.total) +
                        ", batch size " + std::to_string(mb.size()) + ")");
            opt.apply(params.theta, grad, cfg.learning_rate);
        }
    }
    return last;
}

// Per-step interception points used by the refinement engine; the default
// implementation is a no-op so plain PPO and refinement share one loop.
class StepInterceptor {
public:
    virtual ~StepInterceptor() = default;
    virtual Action intercept_action(const State& state, const Action& policy_action,
                                    bool& matched) {
        matched = false;
        return policy_action;
    }
    virtual double shape_reward(const State& state, const Action& executed_action,
                                double env_reward, bool matched, int timestep) {
        (void)state; (void)executed_action; (void)matched; (void)timestep;
        return env_reward;
    }
    virtual void on_iteration(int iteration) { (void)iteration; }
};

struct TrainOptions {
    int iterations = 10;
    int steps_per_iteration = 1024;
    std::uint64_t seed = 0;
    bool record_trajectories = false;
};

struct IterationLog {
    int iteration = 0;
    int episodes = 0;
    int matched_states = 0;
    double mean_return = 0.0;
};

struct TrainResult {
    std::vector<IterationLog> log;
    std::vector<Trajectory> trajectories; // filled when record_trajectories
    long total_env_steps = 0;
};

// The shared rollout-and-update loop behind both pretraining and
// refinement. All randomness comes from streams derived from options.seed,
// and the interceptor never touches those streams, so a run with a no-op
// interceptor is bit-identical to plain PPO.
inline TrainResult train_loop(PolicyParams& params, Env& env, const PpoConfig& cfg,
                              const TrainOptions& options, StepInterceptor* interceptor) {
    cfg.validate();
    StepInterceptor default_hook;
    if (interceptor == nullptr) interceptor = &default_hook;

    RngStream episode_seeds(options.seed, 0xE5);
    RngStream action_rng(options.seed, 0xAC7);
    RngStream shuffle_rng(options.seed, 0x5F);
    AdamState opt;
    TrainResult result;

    int episode_counter = 0;
    for (int iter = 0; iter < options.iterations; ++iter) {
        interceptor->on_iteration(iter);
        RolloutBatch batch;
        std::vector<std::size_t> episode_starts;
        std::vector<double> episode_returns;
        int matched_states = 0;

        State s = env.reset(episode_seeds.next_u64());
        Trajectory traj;
        traj.episode_id = episode_counter;
        traj.seed = options.seed;
        episode_starts.push_back(0);
        double ep_return = 0.0;
        int t_in_episode = 0;

        auto finish_segment = [&](double last_value, std::size_t start, std::size_t end) {
            std::vector<double> rewards(batch.rewards.begin() + start, batch.rewards.begin() + end);
            std::vector<double> values(batch.values.begin() + start, batch.values.begin() + end);
            GaeResult g = gae(rewards, values, last_value, cfg.gamma, cfg.gae_lambda);
            batch.advantages.insert(batch.advantages.end(), g.advantages.begin(),
                                    g.advantages.end());
            batch.returns.insert(batch.returns.end(), g.returns.begin(), g.returns.end());
        };

        std::size_t segment_start = 0;
        for (int step = 0; step < options.steps_per_iteration; ++step) {
            std::vector<double> obs = env.observe(s);
            ForwardResult fr = policy_forward(params, obs);
            SampledAction sampled = sample_action(fr.dist, action_rng);

            bool matched = false;
            Action executed = interceptor->intercept_action(s, sampled.action, matched);
            if (matched) ++matched_states;
            double logp_exec =
                matched ? log_prob(fr.dist, executed) : sampled.log_prob;

            StepResult res = env.step(executed);
            double shaped =
                interceptor->shape_reward(s, executed, res.reward, matched, t_in_episode);

            batch.observations.push_back(std::move(obs));
            batch.actions.push_back(executed);
            batch.log_probs.push_back(logp_exec);
            batch.rewards.push_back(shaped);
            batch.values.push_back(fr.value);
            ep_return += res.reward;
            ++result.total_env_steps;

            if (options.record_trajectories) {
                Transition tr;
                tr.timestep = t_in_episode;
                tr.state = s;
                tr.policy_action = sampled.action;
                tr.executed_action = executed;
                tr.env_reward = res.reward;
                tr.shaped_reward = shaped;
                tr.next_state = res.state;
                tr.done = res.done;
                record(traj, tr);
            }

            s = res.state;
            ++t_in_episode;

            if (res.done) {
                finish_segment(0.0, segment_start, batch.size());
                segment_start = batch.size();
                episode_returns.push_back(ep_return);
                if (options.record_trajectories) {
                    traj.terminal_reason = res.reason;
                    result.trajectories.push_back(std::move(traj));
                }
                ++episode_counter;
                traj = Trajectory{};
                traj.episode_id = episode_counter;
                traj.seed = options.seed;
                ep_return = 0.0;
                t_in_episode = 0;
                s = env.reset(episode_seeds.next_u64());
            }
        }
        if (segment_start < batch.size()) {
            // bootstrap an unfinished episode with the value estimate
            double last_value = policy_forward(params, env.observe(s)).value;
            finish_segment(last_value, segment_start, batch.size());
            // carry the partial episode's return into the next iteration's env,
            // but drop it from the per-iteration mean
            ++episode_counter;
        }

        ppo_update(params, batch, cfg, opt, shuffle_rng);

        IterationLog log;
        log.iteration = iter;
        log.episodes = static_cast<int>(episode_returns.size());
        log.matched_states = matched_states;
        log.mean_return = episode_returns.empty()
                              ? 0.0
                              : std::accumulate(episode_returns.begin(), episode_returns.end(),
                                                0.0) / episode_returns.size();
        result.log.push_back(log);
    }
    return result;
}

// Standard PPO with no advisor; a short budget yields the sub-optimal
// starting policy.
inline PolicyParams pretrain(Env& env, const PpoConfig& cfg, const TrainOptions& options) {
    PolicyHead head = env.action_kind() == Action::Kind::Discrete ? PolicyHead::Categorical
                                                                  : PolicyHead::Gaussian;
    int out_dim = head == PolicyHead::Categorical ? env.action_arity() : env.action_dim();
    PolicyParams params =
        init_policy(env.name(), head, env.obs_dim(), out_dim, cfg.hidden, options.seed);
    if (options.iterations > 0) train_loop(params, env, cfg, options, nullptr);
    return params;
}

} // namespace ultra
