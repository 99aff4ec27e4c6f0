// ultra: policy-refinement experiment harness.
//
// One subcommand per pipeline stage plus `pipeline` to run several in order.
// Flags override config keys; the HTTP advisor backend reads its API key from
// the ULTRA_ADVISOR_API_KEY environment variable.

#include <cstdio>
#include <exception>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "ultra/pipeline.hpp"

namespace {

struct CliOptions {
    std::string config_path;
    std::string stages = "pretrain,rollout,identify,analyze,refine,eval,report";
    std::optional<std::uint64_t> seed_override;
    std::optional<std::string> backend_override;
};

ultra::RunConfig load_config(const CliOptions& opts) {
    ultra::RunConfig cfg = opts.config_path.empty()
                               ? ultra::parse_run_config(ultra::Json::object())
                               : ultra::load_run_config(opts.config_path);
    if (opts.seed_override) {
        cfg.seeds = {*opts.seed_override};
        cfg.echo["seeds"] = cfg.seeds;
    }
    if (opts.backend_override) {
        if (*opts.backend_override == "oracle") {
            cfg.backend.kind = ultra::AdvisorBackendConfig::Kind::ScriptedOracle;
        } else if (*opts.backend_override == "http") {
            cfg.backend.kind = ultra::AdvisorBackendConfig::Kind::HttpChat;
        } else {
            throw ultra::ConfigError("--backend must be oracle or http");
        }
        cfg.echo["backend"]["kind"] = *opts.backend_override;
    }
    return cfg;
}

int run_stages(const CliOptions& opts, const std::string& stages_csv) {
    ultra::RunConfig cfg = load_config(opts);
    auto stages = ultra::parse_stage_list(stages_csv);
    ultra::Pipeline pipeline(cfg);
    ultra::PipelineResult result = pipeline.run(stages);
    for (const auto& outcome : result.outcomes)
        std::printf("%-9s %s\n", ultra::to_string(outcome.stage),
                    outcome.skipped ? "skipped (up to date)" : "done");
    if (pipeline.advisor_queries() > 0 || pipeline.cache_hits() > 0)
        std::printf("advisor: %ld queries, %ld cache hits\n", pipeline.advisor_queries(),
                    pipeline.cache_hits());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"policy refinement harness"};
    app.require_subcommand(1);

    CliOptions opts;
    app.add_option("--config", opts.config_path, "path to the JSON run configuration");
    app.add_option("--seed-override", opts.seed_override, "replace the configured seed list");
    app.add_option("--backend", opts.backend_override, "advisor backend: oracle or http")
        ->check(CLI::IsMember({"oracle", "http"}));

    std::string stage_list;
    for (const char* name :
         {"pretrain", "rollout", "identify", "analyze", "refine", "eval", "report"}) {
        app.add_subcommand(name, std::string("run the ") + name + " stage");
    }
    auto* pipeline_cmd = app.add_subcommand("pipeline", "run several stages in order");
    pipeline_cmd->add_option("--stages", opts.stages, "comma-separated stage list");

    CLI11_PARSE(app, argc, argv);

    try {
        auto* sub = app.get_subcommands().front();
        if (sub->get_name() == "pipeline") return run_stages(opts, opts.stages);
        return run_stages(opts, sub->get_name());
    } catch (const ultra::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const ultra::MissingDependencyError& e) {
        std::fprintf(stderr, "%s\n", e.what());
        return 3;
    } catch (const ultra::AuthenticationError& e) {
        std::fprintf(stderr, "advisor failure: %s\n", e.what());
        return 4;
    } catch (const ultra::NetworkError& e) {
        std::fprintf(stderr, "advisor failure: %s\n", e.what());
        return 4;
    } catch (const ultra::NonFiniteGradientError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 5;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
