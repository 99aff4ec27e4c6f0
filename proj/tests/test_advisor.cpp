#include <doctest.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <thread>
#include <unistd.h>

#include "ultra/advisor.hpp"
#include "ultra/pong.hpp"

using namespace ultra;

namespace {

namespace fs = std::filesystem;

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("ultra_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct EnvVarGuard {
    std::string name;
    std::optional<std::string> saved;
    EnvVarGuard(const char* var, const char* value) : name(var) {
        if (const char* old = std::getenv(var)) saved = old;
        if (value) ::setenv(var, value, 1);
        else ::unsetenv(var);
    }
    ~EnvVarGuard() {
        if (saved) ::setenv(name.c_str(), saved->c_str(), 1);
        else ::unsetenv(name.c_str());
    }
};

// Minimal OpenAI-style chat endpoint for exercising the wire format.
struct ChatServer {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};
    std::atomic<int> failures_remaining{0};
    int status_on_failure = 500;

    explicit ChatServer(std::string reply = "ok") {
        server.Post("/v1/chat/completions", [this, reply](const httplib::Request& req,
                                                          httplib::Response& res) {
            ++requests;
            if (req.get_header_value("Authorization") != "Bearer test-key") {
                res.status = 401;
                return;
            }
            if (failures_remaining.load() > 0) {
                --failures_remaining;
                res.status = status_on_failure;
                return;
            }
            Json body = Json::parse(req.body);
            REQUIRE(body.contains("model"));
            REQUIRE(body.contains("messages"));
            REQUIRE(body.contains("temperature"));
            REQUIRE(body.at("messages").at(0).at("role") == "user");
            Json out;
            out["choices"] = Json::array(
                {Json{{"message", Json{{"role", "assistant"}, {"content", reply}}}}});
            res.set_content(out.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~ChatServer() {
        server.stop();
        thread.join();
    }

    AdvisorBackendConfig backend() const {
        AdvisorBackendConfig cfg;
        cfg.kind = AdvisorBackendConfig::Kind::HttpChat;
        cfg.http.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
        cfg.http.max_retries = 3;
        cfg.http.backoff_initial_ms = 1;
        cfg.http.timeout_seconds = 5;
        return cfg;
    }
};

AdvisorPrompt text_prompt(const std::string& text) {
    AdvisorPrompt p;
    p.env_kind = "pong";
    p.rendered_text = text;
    p.finalize();
    return p;
}

Trajectory pong_trajectory(std::uint64_t seed, int max_steps) {
    PongEnv env;
    Trajectory traj;
    traj.episode_id = 0;
    traj.seed = seed;
    State s = env.reset(seed);
    Action stay = Action::discrete(0, 3);
    for (int t = 0; t < max_steps; ++t) {
        StepResult res = env.step(stay);
        Transition tr;
        tr.timestep = t;
        tr.state = s;
        tr.policy_action = stay;
        tr.executed_action = stay;
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
    return traj;
}

} // namespace

TEST_CASE("response cache: content-addressed layout and round-trip") {
    TempDir tmp;
    ResponseCache cache(tmp.path / "cache");
    std::string hash = Sha256::hex("some prompt");

    CHECK_FALSE(cache.lookup(hash).has_value());
    cache.store(hash, "oracle", "the response body");
    auto hit = cache.lookup(hash);
    REQUIRE(hit.has_value());
    CHECK(*hit == "the response body");

    fs::path entry = tmp.path / "cache" / hash.substr(0, 2) / (hash + ".json");
    REQUIRE(fs::exists(entry));
    std::ifstream in(entry);
    Json j = Json::parse(in);
    CHECK(j.at("prompt_hash") == hash);
    CHECK(j.at("backend") == "oracle");
    CHECK(j.at("response") == "the response body");
    CHECK(j.contains("timestamp"));
    // no stray temp file left behind
    CHECK_FALSE(fs::exists(entry.string() + ".tmp"));
}

TEST_CASE("query: cache hit skips the backend entirely") {
    TempDir tmp;
    ResponseCache cache(tmp.path / "cache");
    AdvisorBackendConfig backend = AdvisorBackendConfig::oracle_for("pong");

    Trajectory traj = pong_trajectory(7, 10);
    AdvisorPrompt prompt = build_identification_prompt("pong", traj, 0, 10);

    QueryStats stats;
    std::string first = query(backend, prompt, &cache, &stats);
    CHECK(stats.backend_calls == 1);
    CHECK(stats.cache_hits == 0);

    std::string second = query(backend, prompt, &cache, &stats);
    CHECK(stats.backend_calls == 1);
    CHECK(stats.cache_hits == 1);
    CHECK(first == second);

    // a cached response is served even when the backend would now fail:
    // redirect the backend to an unsupported environment
    backend.oracle_env_kind = "cartpole";
    CHECK(query(backend, prompt, &cache, &stats) == first);

    // without the cache the mismatch surfaces
    CHECK_THROWS_AS(query(backend, prompt, nullptr, &stats), OracleUnsupportedEnvError);
}

TEST_CASE("http backend: wire format, bearer auth, and response extraction") {
    EnvVarGuard key(kAdvisorApiKeyEnvVar, "test-key");
    ChatServer server("{timeslot 0, critical, move left, late}");
    QueryStats stats;
    std::string response = query(server.backend(), text_prompt("hello"), nullptr, &stats);
    CHECK(response == "{timeslot 0, critical, move left, late}");
    CHECK(server.requests.load() == 1);
    CHECK(stats.backend_calls == 1);
}

TEST_CASE("http backend: missing credential is an authentication error") {
    EnvVarGuard key(kAdvisorApiKeyEnvVar, nullptr);
    ChatServer server;
    CHECK_THROWS_AS(query(server.backend(), text_prompt("hello"), nullptr, nullptr),
                    AuthenticationError);
    CHECK(server.requests.load() == 0);
}

TEST_CASE("http backend: rejected credential is an authentication error") {
    EnvVarGuard key(kAdvisorApiKeyEnvVar, "wrong-key");
    ChatServer server;
    CHECK_THROWS_AS(query(server.backend(), text_prompt("hello"), nullptr, nullptr),
                    AuthenticationError);
    CHECK(server.requests.load() == 1); // no retry on auth rejection
}

TEST_CASE("http backend: retries transient failures with backoff") {
    EnvVarGuard key(kAdvisorApiKeyEnvVar, "test-key");
    ChatServer server("recovered");
    server.failures_remaining = 2;
    std::string response = query(server.backend(), text_prompt("hello"), nullptr, nullptr);
    CHECK(response == "recovered");
    CHECK(server.requests.load() == 3);

    server.failures_remaining = 100; // more than the retry budget
    CHECK_THROWS_AS(query(server.backend(), text_prompt("again"), nullptr, nullptr),
                    NetworkError);
}

TEST_CASE("annotate_trajectory: one record per timestep across windows") {
    TempDir tmp;
    ResponseCache cache(tmp.path / "cache");
    Trajectory traj = pong_trajectory(7, 32);
    AnnotateOptions opts;
    opts.window_size = 10; // forces several windows
    AnnotateResult r = annotate_trajectory("pong", traj, AdvisorBackendConfig::oracle_for("pong"),
                                           &cache, opts);
    REQUIRE(r.records.size() == traj.size());
    for (std::size_t t = 0; t < r.records.size(); ++t) {
        CHECK(r.records[t].first == traj.episode_id);
        CHECK(r.records[t].second.timeslot == static_cast<int>(t));
    }
    CHECK(r.stats.backend_calls == 4); // ceil(32 / 10) windows
}

TEST_CASE("annotate_trajectory: malformed responses re-query once, then fail open") {
    EnvVarGuard key(kAdvisorApiKeyEnvVar, "test-key");
    ChatServer server("I am not following the requested format at all.");
    Trajectory traj = pong_trajectory(7, 8);
    AnnotateOptions opts;
    opts.window_size = 8;
    AnnotateResult r = annotate_trajectory("pong", traj, server.backend(), nullptr, opts);
    CHECK(server.requests.load() == 2); // original plus one format-reminder re-query
    REQUIRE(r.records.size() == traj.size());
    for (const auto& [episode, ann] : r.records) CHECK_FALSE(ann.critical);
    CHECK(r.warnings.size() >= 2);
}

TEST_CASE("annotate_trajectory: network failure also fails open") {
    EnvVarGuard key(kAdvisorApiKeyEnvVar, "test-key");
    AdvisorBackendConfig backend;
    backend.kind = AdvisorBackendConfig::Kind::HttpChat;
    backend.http.endpoint = "http://127.0.0.1:9/v1/chat/completions"; // discard port
    backend.http.max_retries = 0;
    backend.http.backoff_initial_ms = 1;
    backend.http.timeout_seconds = 1;
    Trajectory traj = pong_trajectory(7, 4);
    AnnotateResult r = annotate_trajectory("pong", traj, backend, nullptr, {});
    REQUIRE(r.records.size() == traj.size());
    for (const auto& [episode, ann] : r.records) CHECK_FALSE(ann.critical);
    CHECK_FALSE(r.warnings.empty());
}
