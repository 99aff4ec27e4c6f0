#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "ultra/advisor.hpp"
#include "ultra/lookup.hpp"
#include "ultra/ppo.hpp"
#include "ultra/prompts.hpp"

namespace ultra {

enum class RefineVariant { A, R, RA };

inline const char* to_string(RefineVariant v) {
    switch (v) {
        case RefineVariant::A: return "A";
        case RefineVariant::R: return "R";
        default: return "RA";
    }
}

inline RefineVariant refine_variant_from_string(const std::string& s) {
    if (s == "A" || s == "a") return RefineVariant::A;
    if (s == "R" || s == "r") return RefineVariant::R;
    if (s == "RA" || s == "ra") return RefineVariant::RA;
    throw ConfigError("unknown refinement variant: " + s);
}

struct RefineConfig {
    RefineVariant variant = RefineVariant::RA;
    double alpha = 0.5;          // advisor-reward mixing weight
    double match_epsilon = 0.05; // continuous-state match radius (L-inf)

    void validate() const {
        if (alpha < 0.0) throw ConfigError("refine: alpha must be non-negative");
        if (match_epsilon < 0.0) throw ConfigError("refine: epsilon must be non-negative");
    }
};

// r = r_env + alpha * r_llm at matched states, r_env elsewhere. alpha = 0 is
// exactly the environment reward, bit for bit.
inline double mix_reward(double env_reward, double llm_reward, double alpha, bool matched) {
    if (!matched || alpha == 0.0) return env_reward;
    return env_reward + alpha * llm_reward;
}

// a_true = a_table at states the table covers, the policy's own action
// elsewhere.
inline Action choose_action(const ActionLookupTable& table, const State& state,
                            const Action& policy_action, double epsilon, bool& matched) {
    const Action* hit = table.find(state, epsilon);
    matched = hit != nullptr;
    return matched ? *hit : policy_action;
}

using RewardTable = LookupTable<double>;

// Ask the advisor for a shaping reward at every critical annotated state,
// keyed by the state so the training loop can recall it on revisits. Advisor
// failures on individual states fail open (state simply left unshaped).
inline RewardTable build_reward_table(
    const std::string& env_kind, const std::vector<Trajectory>& trajectories,
    const std::vector<std::pair<int, CriticalAnnotation>>& annotations,
    const CaseAnalysis& analysis, const AdvisorBackendConfig& backend, ResponseCache* cache,
    QueryStats* stats = nullptr, std::vector<std::string>* warnings = nullptr) {
    std::unordered_map<long long, const Transition*> by_position;
    for (const auto& traj : trajectories)
        for (const auto& tr : traj.transitions)
            by_position[(static_cast<long long>(traj.episode_id) << 20) | tr.timestep] = &tr;

    RewardTable table;
    for (const auto& [episode, ann] : annotations) {
        if (!ann.critical) continue;
        auto it = by_position.find((static_cast<long long>(episode) << 20) | ann.timeslot);
        if (it == by_position.end())
            throw DanglingAnnotationError("annotation for episode " + std::to_string(episode) +
                                          ", timeslot " + std::to_string(ann.timeslot) +
                                          " has no matching transition");
        const Transition& tr = *it->second;
        AdvisorPrompt prompt = build_reward_prompt(env_kind, tr, analysis, ann.timeslot);
        try {
            std::string response = query(backend, prompt, cache, stats);
            RewardJudgment rj = parse_reward(response, warnings);
            table.insert(tr.state, rj.reward);
        } catch (const MissingRewardError& e) {
            if (warnings) warnings->push_back(e.what());
        } catch (const NetworkError& e) {
            if (warnings) warnings->push_back(e.what());
        }
    }
    return table;
}

// The refinement interceptor: variant A overrides actions only, variant R
// mixes rewards only, variant RA does both. Both effects trigger on the same
// table match, and neither consumes training randomness.
class Refiner : public StepInterceptor {
public:
    Refiner(const RefineConfig& cfg, const ActionLookupTable* actions,
            const RewardTable* rewards)
        : cfg_(cfg), actions_(actions), rewards_(rewards) {
        cfg_.validate();
    }

    Action intercept_action(const State& state, const Action& policy_action,
                            bool& matched) override {
        Action chosen = choose_action(*actions_, state, policy_action,
                                      cfg_.match_epsilon, matched);
        if (cfg_.variant == RefineVariant::R) return policy_action;
        return chosen;
    }

    double shape_reward(const State& state, const Action& /*executed*/, double env_reward,
                        bool matched, int /*timestep*/) override {
        if (cfg_.variant == RefineVariant::A) return env_reward;
        double llm_reward = 0.0;
        if (matched && rewards_ != nullptr) {
            const double* r = rewards_->find(state, cfg_.match_epsilon);
            if (r != nullptr) llm_reward = *r;
        }
        return mix_reward(env_reward, llm_reward, cfg_.alpha, matched);
    }

private:
    RefineConfig cfg_;
    const ActionLookupTable* actions_;
    const RewardTable* rewards_;
};

struct RefineRunLog {
    std::vector<IterationLog> iterations;
    long advisor_queries = 0;
    long cache_hits = 0;
};

inline void save_run_log(const std::string& path, const RefineRunLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_run_log: cannot open " + path);
    for (const auto& it : log.iterations) {
        Json j;
        j["iter"] = it.iteration;
        j["episodes"] = it.episodes;
        j["matched_states"] = it.matched_states;
        j["advisor_queries"] = log.advisor_queries;
        j["cache_hits"] = log.cache_hits;
        j["mean_return"] = it.mean_return;
        out << j.dump() << "\n";
    }
}

// Continue PPO training from the given parameters with table-driven action
// override and reward mixing. With an empty table (or variant R at alpha 0)
// this produces exactly the same parameter bytes as plain PPO.
inline RefineRunLog refine(PolicyParams& params, Env& env, const PpoConfig& ppo_cfg,
                           const RefineConfig& refine_cfg, const TrainOptions& options,
                           const ActionLookupTable& actions, const RewardTable& rewards,
                           const QueryStats& stats = {}) {
    Refiner hook(refine_cfg, &actions, &rewards);
    TrainResult result = train_loop(params, env, ppo_cfg, options, &hook);
    RefineRunLog log;
    log.iterations = std::move(result.log);
    log.advisor_queries = stats.backend_calls;
    log.cache_hits = stats.cache_hits;
    return log;
}

} // namespace ultra
