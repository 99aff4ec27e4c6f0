#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "ultra/config.hpp"
#include "ultra/eval.hpp"
#include "ultra/lookup.hpp"
#include "ultra/refine.hpp"
#include "ultra/report.hpp"

namespace ultra {

enum class Stage { Pretrain, Rollout, Identify, Analyze, Refine, Eval, Report };

inline const char* to_string(Stage s) {
    switch (s) {
        case Stage::Pretrain: return "pretrain";
        case Stage::Rollout: return "rollout";
        case Stage::Identify: return "identify";
        case Stage::Analyze: return "analyze";
        case Stage::Refine: return "refine";
        case Stage::Eval: return "eval";
        default: return "report";
    }
}

inline Stage stage_from_string(const std::string& s) {
    if (s == "pretrain") return Stage::Pretrain;
    if (s == "rollout") return Stage::Rollout;
    if (s == "identify") return Stage::Identify;
    if (s == "analyze") return Stage::Analyze;
    if (s == "refine") return Stage::Refine;
    if (s == "eval") return Stage::Eval;
    if (s == "report") return Stage::Report;
    throw ConfigError("unknown stage: " + s);
}

inline std::vector<Stage> parse_stage_list(const std::string& csv) {
    std::vector<Stage> stages;
    std::stringstream ss(csv);
    std::string token;
    while (std::getline(ss, token, ',')) {
        token = detail::trim(token);
        if (!token.empty()) stages.push_back(stage_from_string(token));
    }
    if (stages.empty()) throw ConfigError("empty stage list");
    return stages;
}

struct StageOutcome {
    Stage stage;
    bool skipped = false; // content-hash matched, artifacts already current
};

struct PipelineResult {
    std::vector<StageOutcome> outcomes;
};

namespace detail {

inline std::string file_sha256(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingDependencyError("missing artifact: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return Sha256::hex(ss.str());
}

inline void require_artifact(const std::string& path, const char* producer) {
    if (!std::filesystem::exists(path))
        throw MissingDependencyError("missing artifact: " + path + " (produced by the " +
                                     producer + " stage)");
}

} // namespace detail

// Artifact locations and stage plumbing for one configured run. Stages are
// idempotent: each records a hash of its configuration and input artifacts,
// and is skipped when the hash matches and its outputs still exist.
class Pipeline {
public:
    explicit Pipeline(RunConfig cfg) : cfg_(std::move(cfg)), cache_(cfg_.paths.cache) {
        for (const std::string& dir :
             {cfg_.paths.checkpoints, cfg_.paths.trajectories, cfg_.paths.annotations,
              cfg_.paths.cache, cfg_.paths.reports, cfg_.paths.stamps})
            std::filesystem::create_directories(dir);
    }

    std::string pretrain_checkpoint() const { return join(cfg_.paths.checkpoints, "pretrain.json"); }
    std::string refined_checkpoint() const {
        return join(cfg_.paths.checkpoints,
                    std::string("refined_") + to_string(cfg_.refine.variant) + ".json");
    }
    std::string rollout_file() const { return join(cfg_.paths.trajectories, "rollout.jsonl"); }
    std::string annotations_file() const {
        return join(cfg_.paths.annotations, "annotations.jsonl");
    }
    std::string analysis_file() const { return join(cfg_.paths.annotations, "analysis.json"); }
    std::string refine_log_file() const {
        return join(cfg_.paths.reports,
                    std::string("refine_log_") + to_string(cfg_.refine.variant) + ".jsonl");
    }
    std::string eval_file() const { return join(cfg_.paths.reports, "eval.json"); }
    std::string report_csv() const { return join(cfg_.paths.reports, "report.csv"); }
    std::string curve_csv() const { return join(cfg_.paths.reports, "learning_curve.csv"); }
    std::string curve_svg() const { return join(cfg_.paths.reports, "learning_curve.svg"); }

    const RunConfig& config() const { return cfg_; }
    long advisor_queries() const { return stats_.backend_calls; }
    long cache_hits() const { return stats_.cache_hits; }

    PipelineResult run(std::vector<Stage> stages) {
        std::sort(stages.begin(), stages.end(),
                  [](Stage a, Stage b) { return static_cast<int>(a) < static_cast<int>(b); });
        stages.erase(std::unique(stages.begin(), stages.end()), stages.end());
        PipelineResult result;
        for (Stage s : stages) {
            StageOutcome outcome;
            outcome.stage = s;
            outcome.skipped = !run_stage(s);
            result.outcomes.push_back(outcome);
        }
        return result;
    }

private:
    static std::string join(const std::string& dir, const std::string& leaf) {
        return (std::filesystem::path(dir) / leaf).string();
    }

    std::string stage_config_hash(Stage s) const {
        // the whole config echo is conservative but always correct: any config
        // change invalidates every stage
        Json j;
        j["stage"] = to_string(s);
        j["config"] = cfg_.echo;
        return Sha256::hex(j.dump());
    }

    std::string input_hash(Stage s, const std::vector<std::string>& inputs) const {
        std::string acc = stage_config_hash(s);
        for (const auto& path : inputs) acc += ":" + detail::file_sha256(path);
        return Sha256::hex(acc);
    }

    bool up_to_date(Stage s, const std::string& hash,
                    const std::vector<std::string>& outputs) const {
        std::ifstream in(join(cfg_.paths.stamps, std::string(to_string(s)) + ".json"),
                         std::ios::binary);
        if (!in) return false;
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded() || j.value("input_hash", "") != hash) return false;
        for (const auto& out : outputs)
            if (!std::filesystem::exists(out)) return false;
        return true;
    }

    void write_stamp(Stage s, const std::string& hash,
                     const std::vector<std::string>& outputs) const {
        Json j;
        j["stage"] = to_string(s);
        j["input_hash"] = hash;
        j["outputs"] = outputs;
        std::ofstream out(join(cfg_.paths.stamps, std::string(to_string(s)) + ".json"),
                          std::ios::binary);
        out << j.dump(2) << "\n";
    }

    // returns true if the stage actually ran
    bool run_stage(Stage s) {
        std::vector<std::string> inputs, outputs;
        switch (s) {
            case Stage::Pretrain:
                outputs = {pretrain_checkpoint()};
                break;
            case Stage::Rollout:
                detail::require_artifact(pretrain_checkpoint(), "pretrain");
                inputs = {pretrain_checkpoint()};
                outputs = {rollout_file()};
                break;
            case Stage::Identify:
                detail::require_artifact(rollout_file(), "rollout");
                inputs = {rollout_file()};
                outputs = {annotations_file()};
                break;
            case Stage::Analyze:
                detail::require_artifact(rollout_file(), "rollout");
                detail::require_artifact(annotations_file(), "identify");
                inputs = {rollout_file(), annotations_file()};
                outputs = {analysis_file()};
                break;
            case Stage::Refine:
                detail::require_artifact(pretrain_checkpoint(), "pretrain");
                detail::require_artifact(rollout_file(), "rollout");
                detail::require_artifact(annotations_file(), "identify");
                inputs = {pretrain_checkpoint(), rollout_file(), annotations_file()};
                if (std::filesystem::exists(analysis_file())) inputs.push_back(analysis_file());
                outputs = {refined_checkpoint(), refine_log_file()};
                break;
            case Stage::Eval:
                detail::require_artifact(pretrain_checkpoint(), "pretrain");
                detail::require_artifact(refined_checkpoint(), "refine");
                inputs = {pretrain_checkpoint(), refined_checkpoint()};
                outputs = {eval_file()};
                break;
            case Stage::Report:
                detail::require_artifact(eval_file(), "eval");
                detail::require_artifact(refine_log_file(), "refine");
                inputs = {eval_file(), refine_log_file()};
                outputs = {report_csv(), curve_csv(), curve_svg()};
                break;
        }
        std::string hash = input_hash(s, inputs);
        if (up_to_date(s, hash, outputs)) return false;
        switch (s) {
            case Stage::Pretrain: do_pretrain(); break;
            case Stage::Rollout: do_rollout(); break;
            case Stage::Identify: do_identify(); break;
            case Stage::Analyze: do_analyze(); break;
            case Stage::Refine: do_refine(); break;
            case Stage::Eval: do_eval(); break;
            case Stage::Report: do_report(); break;
        }
        write_stamp(s, hash, outputs);
        return true;
    }

    void do_pretrain() {
        auto env = make_env(cfg_.env);
        TrainOptions options;
        options.iterations = cfg_.pretrain_iterations;
        options.steps_per_iteration = cfg_.steps_per_iteration;
        options.seed = cfg_.seeds.front();
        PolicyParams params = pretrain(*env, cfg_.ppo, options);
        save_checkpoint(pretrain_checkpoint(), params, cfg_.echo);
    }

    void do_rollout() {
        PolicyParams params = load_checkpoint(pretrain_checkpoint());
        auto env = make_env(cfg_.env);
        RngStream episode_seeds(cfg_.seeds.front(), 0x011);
        RngStream action_rng(cfg_.seeds.front(), 0x1AC);
        std::vector<Trajectory> trajectories;
        for (int e = 0; e < cfg_.rollout_episodes; ++e) {
            Trajectory traj;
            traj.episode_id = e;
            traj.seed = cfg_.seeds.front();
            State s = env->reset(episode_seeds.next_u64());
            int t = 0;
            while (true) {
                ForwardResult fr = policy_forward(params, env->observe(s));
                SampledAction sampled = sample_action(fr.dist, action_rng);
                StepResult res = env->step(sampled.action);
                Transition tr;
                tr.timestep = t++;
                tr.state = s;
                tr.policy_action = sampled.action;
                tr.executed_action = sampled.action;
                tr.env_reward = res.reward;
                tr.shaped_reward = res.reward;
                tr.next_state = res.state;
                tr.done = res.done;
                record(traj, tr);
                s = res.state;
                if (res.done) {
                    traj.terminal_reason = res.reason;
                    break;
                }
            }
            trajectories.push_back(std::move(traj));
        }
        save_trajectories(rollout_file(), cfg_.env, cfg_.seeds.front(), trajectories);
    }

    void do_identify() {
        TrajectoryFile file = load_trajectories(rollout_file());
        std::vector<std::pair<int, CriticalAnnotation>> records;
        AnnotateOptions opts;
        opts.window_size = cfg_.window_size;
        for (const auto& traj : file.trajectories) {
            AnnotateResult r = annotate_trajectory(cfg_.env, traj, cfg_.backend, &cache_, opts);
            stats_.backend_calls += r.stats.backend_calls;
            stats_.cache_hits += r.stats.cache_hits;
            for (auto& rec : r.records) records.push_back(std::move(rec));
        }
        save_annotations(
            annotations_file(), records,
            cfg_.backend.kind == AdvisorBackendConfig::Kind::ScriptedOracle ? "oracle" : "llm");
    }

    void do_analyze() {
        TrajectoryFile file = load_trajectories(rollout_file());
        auto records = load_annotations(annotations_file());
        Json out;
        out["episodes"] = Json::array();
        for (const auto& traj : file.trajectories) {
            if (!traj.complete()) continue;
            std::vector<CriticalAnnotation> anns;
            for (const auto& [episode, ann] : records)
                if (episode == traj.episode_id && ann.critical) anns.push_back(ann);
            AdvisorPrompt prompt = build_case_analysis_prompt(cfg_.env, traj, anns);
            std::string response = query(cfg_.backend, prompt, &cache_, &stats_);
            out["episodes"].push_back(
                Json{{"episode", traj.episode_id}, {"text", response}});
        }
        std::ofstream f(analysis_file(), std::ios::binary);
        f << out.dump(2) << "\n";
    }

    CaseAnalysis load_analysis() const {
        CaseAnalysis analysis;
        std::ifstream in(analysis_file(), std::ios::binary);
        if (!in) return analysis; // reward prompts then say "no prior analysis"
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded()) return analysis;
        for (const auto& ep : j.value("episodes", Json::array())) {
            if (!analysis.text.empty()) analysis.text += "\n";
            analysis.text += ep.value("text", "");
        }
        return analysis;
    }

    void do_refine() {
        PolicyParams params = load_checkpoint(pretrain_checkpoint());
        TrajectoryFile file = load_trajectories(rollout_file());
        auto records = load_annotations(annotations_file());
        ActionLookupTable actions = build_lookup(file.trajectories, records);
        RewardTable rewards;
        if (cfg_.refine.variant != RefineVariant::A)
            rewards = build_reward_table(cfg_.env, file.trajectories, records, load_analysis(),
                                         cfg_.backend, &cache_, &stats_);
        auto env = make_env(cfg_.env);
        TrainOptions options;
        options.iterations = cfg_.refine_iterations;
        options.steps_per_iteration = cfg_.steps_per_iteration;
        options.seed = cfg_.seeds.front();
        RefineRunLog log = refine(params, *env, cfg_.ppo, cfg_.refine, options, actions,
                                  rewards, stats_);
        save_checkpoint(refined_checkpoint(), params, cfg_.echo);
        save_run_log(refine_log_file(), log);
    }

    EvalResult eval_checkpoint(const std::string& path) const {
        PolicyParams params = load_checkpoint(path);
        auto env = make_env(cfg_.env);
        if (params.env_name != env->name())
            throw ConfigError("eval: checkpoint for " + params.env_name +
                              " does not match environment " + env->name());
        EvalConfig ec;
        ec.seeds = cfg_.seeds;
        ec.episodes_per_seed = cfg_.eval_episodes;
        return evaluate(*env, params, ec);
    }

    static Json eval_to_json(const EvalResult& r) {
        Json j;
        j["per_seed_means"] = r.per_seed_means;
        j["mean"] = r.mean;
        j["std"] = r.stddev;
        j["episodes"] = r.episode_returns.size();
        j["duration_seconds"] = r.duration_seconds;
        return j;
    }

    void do_eval() {
        Json out;
        out["results"]["control"] = eval_to_json(eval_checkpoint(pretrain_checkpoint()));
        out["results"][std::string("refined_") + to_string(cfg_.refine.variant)] =
            eval_to_json(eval_checkpoint(refined_checkpoint()));
        out["config"] = cfg_.echo;
        std::ofstream f(eval_file(), std::ios::binary);
        f << out.dump(2) << "\n";
    }

    void do_report() {
        std::ifstream in(eval_file(), std::ios::binary);
        Json evals = Json::parse(in);
        std::vector<VariantSummary> variants;
        for (const auto& [name, r] : evals.at("results").items()) {
            VariantSummary v;
            v.name = name == "control" ? "control" : name;
            v.eval.mean = r.at("mean").get<double>();
            v.eval.stddev = r.at("std").get<double>();
            v.eval.per_seed_means = r.at("per_seed_means").get<std::vector<double>>();
            v.eval.episode_returns.resize(r.at("episodes").get<std::size_t>());
            variants.push_back(std::move(v));
        }
        // the refine log carries the refined variant's learning curve
        {
            std::ifstream log(refine_log_file(), std::ios::binary);
            std::string line;
            std::vector<IterationLog> curve;
            while (std::getline(log, line)) {
                if (line.empty()) continue;
                Json j = Json::parse(line);
                IterationLog it;
                it.iteration = j.at("iter").get<int>();
                it.episodes = j.at("episodes").get<int>();
                it.matched_states = j.at("matched_states").get<int>();
                it.mean_return = j.at("mean_return").get<double>();
                curve.push_back(it);
            }
            for (auto& v : variants)
                if (v.name != "control") v.curve = curve;
        }
        write_report_csv(report_csv(), variants);
        write_learning_curve_csv(curve_csv(), variants);
        write_learning_curve_svg(curve_svg(), variants);
    }

    RunConfig cfg_;
    ResponseCache cache_;
    QueryStats stats_;
};

inline PipelineResult run_pipeline(const RunConfig& cfg, const std::vector<Stage>& stages) {
    Pipeline p(cfg);
    return p.run(stages);
}

} // namespace ultra
