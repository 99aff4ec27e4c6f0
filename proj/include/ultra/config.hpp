#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ultra/advisor.hpp"
#include "ultra/ppo.hpp"
#include "ultra/refine.hpp"

namespace ultra {

struct RunPaths {
    std::string out_dir = "runs/default";
    std::string checkpoints;  // <out>/checkpoints
    std::string trajectories; // <out>/trajectories
    std::string annotations;  // <out>/annotations
    std::string cache;        // <out>/cache
    std::string reports;      // <out>/reports
    std::string stamps;       // <out>/stamps (stage idempotence markers)

    void fill_defaults() {
        auto d = [&](std::string& field, const char* leaf) {
            if (field.empty()) field = (std::filesystem::path(out_dir) / leaf).string();
        };
        d(checkpoints, "checkpoints");
        d(trajectories, "trajectories");
        d(annotations, "annotations");
        d(cache, "cache");
        d(reports, "reports");
        d(stamps, "stamps");
    }
};

struct RunConfig {
    std::string env = "pong";
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    int eval_episodes = 100;

    AdvisorBackendConfig backend;
    PpoConfig ppo;
    RefineConfig refine;

    int pretrain_iterations = 10;
    int refine_iterations = 10;
    int steps_per_iteration = 1024;
    int rollout_episodes = 10;
    int window_size = 50;

    RunPaths paths;
    Json echo; // the config document as loaded, embedded in artifacts

    void validate() const {
        if (seeds.empty()) throw ConfigError("config: seed list must be non-empty");
        if (eval_episodes < 1) throw ConfigError("config: eval episode count must be >= 1");
        if (rollout_episodes < 1) throw ConfigError("config: rollout episodes must be >= 1");
        if (window_size < 1) throw ConfigError("config: window size must be >= 1");
        ppo.validate();
        refine.validate();
        std::error_code ec;
        std::filesystem::create_directories(paths.out_dir, ec);
        if (ec) throw ConfigError("config: cannot create output directory " + paths.out_dir);
    }
};

namespace detail {

template <typename T>
void maybe(const Json& j, const char* key, T& field) {
    if (j.contains(key)) field = j.at(key).get<T>();
}

} // namespace detail

inline RunConfig parse_run_config(const Json& j) {
    RunConfig cfg;
    cfg.echo = j;
    detail::maybe(j, "env", cfg.env);
    detail::maybe(j, "seeds", cfg.seeds);
    detail::maybe(j, "eval_episodes", cfg.eval_episodes);
    detail::maybe(j, "pretrain_iterations", cfg.pretrain_iterations);
    detail::maybe(j, "refine_iterations", cfg.refine_iterations);
    detail::maybe(j, "steps_per_iteration", cfg.steps_per_iteration);
    detail::maybe(j, "rollout_episodes", cfg.rollout_episodes);
    detail::maybe(j, "window_size", cfg.window_size);

    if (j.contains("backend")) {
        const Json& b = j.at("backend");
        std::string kind = b.value("kind", "oracle");
        if (kind == "oracle") {
            cfg.backend.kind = AdvisorBackendConfig::Kind::ScriptedOracle;
        } else if (kind == "http") {
            cfg.backend.kind = AdvisorBackendConfig::Kind::HttpChat;
        } else {
            throw ConfigError("config: backend kind must be oracle or http, got " + kind);
        }
        detail::maybe(b, "endpoint", cfg.backend.http.endpoint);
        detail::maybe(b, "model", cfg.backend.http.model);
        detail::maybe(b, "temperature", cfg.backend.http.temperature);
        detail::maybe(b, "timeout_seconds", cfg.backend.http.timeout_seconds);
        detail::maybe(b, "max_retries", cfg.backend.http.max_retries);
    }
    cfg.backend.oracle_env_kind = cfg.env;

    if (j.contains("ppo")) {
        const Json& p = j.at("ppo");
        detail::maybe(p, "clip_epsilon", cfg.ppo.clip_epsilon);
        detail::maybe(p, "gamma", cfg.ppo.gamma);
        detail::maybe(p, "gae_lambda", cfg.ppo.gae_lambda);
        detail::maybe(p, "learning_rate", cfg.ppo.learning_rate);
        detail::maybe(p, "minibatch_size", cfg.ppo.minibatch_size);
        detail::maybe(p, "epochs", cfg.ppo.epochs);
        detail::maybe(p, "value_coef", cfg.ppo.value_coef);
        detail::maybe(p, "entropy_coef", cfg.ppo.entropy_coef);
        detail::maybe(p, "hidden", cfg.ppo.hidden);
    }

    if (j.contains("refine")) {
        const Json& r = j.at("refine");
        if (r.contains("variant"))
            cfg.refine.variant = refine_variant_from_string(r.at("variant").get<std::string>());
        detail::maybe(r, "alpha", cfg.refine.alpha);
        detail::maybe(r, "epsilon", cfg.refine.match_epsilon);
    }
    // the advisor-reward weight defaults differ by environment
    if (!j.contains("refine") || !j.at("refine").contains("alpha"))
        cfg.refine.alpha = cfg.env == "pong" ? 0.5 : 0.1;

    if (j.contains("paths")) {
        const Json& p = j.at("paths");
        detail::maybe(p, "out_dir", cfg.paths.out_dir);
        detail::maybe(p, "checkpoints", cfg.paths.checkpoints);
        detail::maybe(p, "trajectories", cfg.paths.trajectories);
        detail::maybe(p, "annotations", cfg.paths.annotations);
        detail::maybe(p, "cache", cfg.paths.cache);
        detail::maybe(p, "reports", cfg.paths.reports);
    }
    cfg.paths.fill_defaults();
    cfg.validate();
    return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config: cannot open " + path);
    Json j = Json::parse(in, nullptr, false);
    if (j.is_discarded()) throw ConfigError("config: " + path + " is not valid JSON");
    return parse_run_config(j);
}

} // namespace ultra
