#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "ultra/annotations.hpp"
#include "ultra/oracle.hpp"
#include "ultra/prompts.hpp"

namespace ultra {

inline constexpr const char* kAdvisorApiKeyEnvVar = "ULTRA_ADVISOR_API_KEY";

struct HttpChatConfig {
    std::string endpoint = "http://localhost:8080/v1/chat/completions";
    std::string model = "gpt-4o";
    double temperature = 0.0;
    int timeout_seconds = 60;
    int max_retries = 3;
    int backoff_initial_ms = 250;
};

struct AdvisorBackendConfig {
    enum class Kind { HttpChat, ScriptedOracle };
    Kind kind = Kind::ScriptedOracle;
    HttpChatConfig http;
    std::string oracle_env_kind = "pong";
    OracleParams oracle;

    static AdvisorBackendConfig oracle_for(const std::string& env_kind) {
        AdvisorBackendConfig c;
        c.kind = Kind::ScriptedOracle;
        c.oracle_env_kind = env_kind;
        return c;
    }
};

// Content-addressed response cache: cache/<first2>/<hash>.json. Writes go
// through a temp file and an atomic rename so readers never observe a
// partial entry.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path root) : root_(std::move(root)) {}

    std::optional<std::string> lookup(const std::string& prompt_hash) const {
        std::ifstream in(entry_path(prompt_hash), std::ios::binary);
        if (!in) return std::nullopt;
        Json j = Json::parse(in, nullptr, false);
        if (j.is_discarded() || !j.contains("response")) return std::nullopt;
        return j.at("response").get<std::string>();
    }

    void store(const std::string& prompt_hash, const std::string& backend,
               const std::string& response) {
        std::lock_guard<std::mutex> lock(write_mutex_);
        auto path = entry_path(prompt_hash);
        std::filesystem::create_directories(path.parent_path());
        Json j;
        j["prompt_hash"] = prompt_hash;
        j["backend"] = backend;
        j["response"] = response;
        j["timestamp"] = iso_timestamp();
        auto tmp = path;
        tmp += ".tmp";
        {
            std::ofstream out(tmp, std::ios::binary);
            out << j.dump() << "\n";
        }
        std::filesystem::rename(tmp, path);
    }

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path entry_path(const std::string& hash) const {
        return root_ / hash.substr(0, 2) / (hash + ".json");
    }

    static std::string iso_timestamp() {
        auto now = std::chrono::system_clock::now();
        std::time_t t = std::chrono::system_clock::to_time_t(now);
        char buf[32];
        std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
        return buf;
    }

    std::filesystem::path root_;
    mutable std::mutex write_mutex_;
};

namespace detail {

inline std::pair<std::string, std::string> split_endpoint(const std::string& endpoint) {
    // scheme://host[:port]/path -> (scheme://host[:port], /path)
    auto scheme = endpoint.find("://");
    std::size_t path_start =
        endpoint.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    if (path_start == std::string::npos) return {endpoint, "/"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

inline std::string http_chat_request(const HttpChatConfig& cfg, const std::string& prompt_text) {
    const char* key = std::getenv(kAdvisorApiKeyEnvVar);
    if (key == nullptr || *key == '\0')
        throw AuthenticationError(std::string("advisor: missing credential; set ") +
                                  kAdvisorApiKeyEnvVar);

    auto [base, path] = split_endpoint(cfg.endpoint);
    Json body;
    body["model"] = cfg.model;
    body["messages"] = Json::array({Json{{"role", "user"}, {"content", prompt_text}}});
    body["temperature"] = cfg.temperature;
    std::string payload = body.dump();

    std::string last_error;
    int backoff_ms = cfg.backoff_initial_ms;
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt) {
        if (attempt > 0) {
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff_ms));
            backoff_ms *= 2;
        }
        httplib::Client client(base);
        client.set_connection_timeout(cfg.timeout_seconds);
        client.set_read_timeout(cfg.timeout_seconds);
        client.set_bearer_token_auth(key);
        auto res = client.Post(path, payload, "application/json");
        if (!res) {
            last_error = "transport failure: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw AuthenticationError("advisor: authentication rejected (status " +
                                      std::to_string(res->status) + ")");
        if (res->status >= 500 || res->status == 429) {
            last_error = "status " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw NetworkError("advisor: unexpected status " + std::to_string(res->status));
        Json j = Json::parse(res->body, nullptr, false);
        if (j.is_discarded())
            throw NetworkError("advisor: response body is not valid JSON");
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    }
    throw NetworkError("advisor: retries exhausted (" + last_error + ")");
}

} // namespace detail

struct QueryStats {
    long backend_calls = 0;
    long cache_hits = 0;
};

// Dispatch a prompt to the configured backend through the cache. A cache hit
// returns without contacting the backend at all.
inline std::string query(const AdvisorBackendConfig& backend, const AdvisorPrompt& prompt,
                         ResponseCache* cache, QueryStats* stats = nullptr) {
    if (cache != nullptr) {
        if (auto hit = cache->lookup(prompt.content_hash)) {
            if (stats) ++stats->cache_hits;
            return *hit;
        }
    }
    std::string response;
    std::string backend_name;
    if (backend.kind == AdvisorBackendConfig::Kind::ScriptedOracle) {
        if (backend.oracle_env_kind != prompt.env_kind)
            throw OracleUnsupportedEnvError("oracle backend configured for " +
                                            backend.oracle_env_kind + ", prompt is for " +
                                            prompt.env_kind);
        response = oracle_respond(prompt.env_kind, prompt, backend.oracle);
        backend_name = "oracle";
    } else {
        response = detail::http_chat_request(backend.http, prompt.rendered_text);
        backend_name = "http:" + backend.http.model;
    }
    if (stats) ++stats->backend_calls;
    if (cache != nullptr) cache->store(prompt.content_hash, backend_name, response);
    return response;
}

struct AnnotateOptions {
    int window_size = 50;
};

struct AnnotateResult {
    std::vector<std::pair<int, CriticalAnnotation>> records; // (episode, annotation)
    std::vector<std::string> warnings;
    QueryStats stats;
};

// Windowed identification over a trajectory with the malformed-response
// policy: one re-query with a format reminder, then fail-open (all timesteps
// in the window treated as non-critical).
inline AnnotateResult annotate_trajectory(const std::string& env_kind,
                                          const Trajectory& trajectory,
                                          const AdvisorBackendConfig& backend,
                                          ResponseCache* cache,
                                          const AnnotateOptions& options = {}) {
    AnnotateResult result;
    int n = static_cast<int>(trajectory.size());
    for (int begin = 0; begin < n; begin += options.window_size) {
        int end = std::min(n, begin + options.window_size);
        AdvisorPrompt prompt = build_identification_prompt(env_kind, trajectory, begin, end);

        std::optional<IdentificationParse> parsed;
        for (int attempt = 0; attempt < 2 && !parsed; ++attempt) {
            AdvisorPrompt attempt_prompt = prompt;
            if (attempt == 1) {
                attempt_prompt.rendered_text +=
                    "\nReminder: you must follow the output format exactly, one "
                    "{timeslot, ...} record per state.\n";
                attempt_prompt.finalize();
            }
            try {
                std::string response = query(backend, attempt_prompt, cache, &result.stats);
                parsed = parse_identification(response, begin, end);
            } catch (const ParseError& e) {
                result.warnings.push_back("window [" + std::to_string(begin) + "," +
                                          std::to_string(end) + "): " + e.what());
            } catch (const NetworkError& e) {
                result.warnings.push_back("window [" + std::to_string(begin) + "," +
                                          std::to_string(end) + "): " + e.what());
            }
        }
        if (parsed) {
            for (auto& w : parsed->warnings) result.warnings.push_back(std::move(w));
            for (auto& ann : parsed->annotations)
                result.records.emplace_back(trajectory.episode_id, std::move(ann));
        } else {
            // fail-open: the window degrades to plain PPO
            for (int t = begin; t < end; ++t) {
                CriticalAnnotation ann;
                ann.timeslot = t;
                ann.critical = false;
                ann.explanation = "advisor response unusable; treated as non-critical";
                result.records.emplace_back(trajectory.episode_id, ann);
            }
        }
    }
    return result;
}

} // namespace ultra
