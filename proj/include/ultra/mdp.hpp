#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ultra/errors.hpp"
#include "ultra/rng.hpp"

namespace ultra {

using Json = nlohmann::ordered_json;

// Discrete-grid states carry entity spans {min_x, max_x, min_y, max_y};
// continuous states carry a fixed-dimension real vector.
struct State {
    enum class Kind { DiscreteGrid, ContinuousVector };

    Kind kind = Kind::DiscreteGrid;
    std::vector<std::array<int, 4>> spans;
    std::vector<double> vec;

    bool operator==(const State& other) const {
        return kind == other.kind && spans == other.spans && vec == other.vec;
    }

    Json to_json() const {
        Json j = Json::array();
        if (kind == Kind::DiscreteGrid) {
            for (const auto& s : spans) j.push_back({s[0], s[1], s[2], s[3]});
        } else {
            for (double v : vec) j.push_back(v);
        }
        return j;
    }
};

struct Action {
    enum class Kind { Discrete, Continuous };

    Kind kind = Kind::Discrete;
    int index = 0;
    int arity = 0;
    std::vector<double> vec;

    static Action discrete(int index, int arity) {
        Action a;
        a.kind = Kind::Discrete;
        a.index = index;
        a.arity = arity;
        return a;
    }

    static Action continuous(std::vector<double> v) {
        Action a;
        a.kind = Kind::Continuous;
        a.vec = std::move(v);
        return a;
    }

    bool operator==(const Action& other) const {
        return kind == other.kind && index == other.index && vec == other.vec;
    }

    Json to_json() const {
        if (kind == Kind::Discrete) return Json(index);
        Json j = Json::array();
        for (double v : vec) j.push_back(v);
        return j;
    }
};

struct Transition {
    State state;
    Action policy_action;
    Action executed_action;
    double env_reward = 0.0;
    double shaped_reward = 0.0;
    State next_state;
    bool done = false;
    int timestep = 0;
};

enum class TerminalReason { Goal, Failure, StepLimit };

inline const char* to_string(TerminalReason r) {
    switch (r) {
        case TerminalReason::Goal: return "goal";
        case TerminalReason::Failure: return "failure";
        default: return "step-limit";
    }
}

struct Trajectory {
    int episode_id = 0;
    std::uint64_t seed = 0;
    std::vector<Transition> transitions;
    TerminalReason terminal_reason = TerminalReason::StepLimit;

    std::size_t size() const { return transitions.size(); }
    bool complete() const {
        return !transitions.empty() && transitions.back().done;
    }
};

// Append with the buffer-integrity checks: contiguous timesteps from 0,
// nothing after a terminal transition.
inline void record(Trajectory& trajectory, Transition transition) {
    if (!trajectory.transitions.empty() && trajectory.transitions.back().done)
        throw OrderingError("record: trajectory already closed by a terminal transition");
    int expected = static_cast<int>(trajectory.transitions.size());
    if (transition.timestep != expected)
        throw OrderingError("record: expected timestep " + std::to_string(expected) +
                            ", got " + std::to_string(transition.timestep));
    trajectory.transitions.push_back(std::move(transition));
}

inline double discounted_return(const Trajectory& trajectory, double gamma) {
    double total = 0.0;
    double weight = 1.0;
    for (const auto& tr : trajectory.transitions) {
        total += weight * tr.shaped_reward;
        weight *= gamma;
    }
    return total;
}

// --- JSONL persistence ------------------------------------------------------
// Header line: {"meta": {"env": str, "seed": int, "format_version": 1}}
// Then one transition per line with fixed field order.

inline Json transition_to_json(int episode_id, const Transition& tr) {
    Json j;
    j["episode"] = episode_id;
    j["t"] = tr.timestep;
    j["state"] = tr.state.to_json();
    j["policy_action"] = tr.policy_action.to_json();
    j["executed_action"] = tr.executed_action.to_json();
    j["r_env"] = tr.env_reward;
    j["r_shaped"] = tr.shaped_reward;
    j["done"] = tr.done;
    return j;
}

inline void save_trajectories(const std::string& path, const std::string& env_name,
                              std::uint64_t seed, const std::vector<Trajectory>& trajectories) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("save_trajectories: cannot open " + path);
    Json meta;
    meta["meta"] = {{"env", env_name}, {"seed", seed}, {"format_version", 1}};
    out << meta.dump() << "\n";
    for (const auto& traj : trajectories)
        for (const auto& tr : traj.transitions)
            out << transition_to_json(traj.episode_id, tr).dump() << "\n";
}

struct TrajectoryFile {
    std::string env_name;
    std::uint64_t seed = 0;
    std::vector<Trajectory> trajectories;
};

inline State state_from_json(const Json& j, State::Kind kind) {
    State s;
    s.kind = kind;
    if (kind == State::Kind::DiscreteGrid) {
        for (const auto& span : j)
            s.spans.push_back({span[0].get<int>(), span[1].get<int>(), span[2].get<int>(),
                               span[3].get<int>()});
    } else {
        for (const auto& v : j) s.vec.push_back(v.get<double>());
    }
    return s;
}

inline Action action_from_json(const Json& j, int arity) {
    if (j.is_number_integer()) return Action::discrete(j.get<int>(), arity);
    std::vector<double> v;
    for (const auto& x : j) v.push_back(x.get<double>());
    return Action::continuous(std::move(v));
}

inline TrajectoryFile load_trajectories(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("load_trajectories: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("load_trajectories: empty file " + path);
    Json meta = Json::parse(line);
    TrajectoryFile file;
    file.env_name = meta.at("meta").at("env").get<std::string>();
    file.seed = meta.at("meta").at("seed").get<std::uint64_t>();
    State::Kind kind = file.env_name == "pong" ? State::Kind::DiscreteGrid
                                               : State::Kind::ContinuousVector;
    Trajectory* current = nullptr;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        Json j = Json::parse(line);
        int episode = j.at("episode").get<int>();
        if (current == nullptr || current->episode_id != episode) {
            file.trajectories.emplace_back();
            current = &file.trajectories.back();
            current->episode_id = episode;
            current->seed = file.seed;
        }
        Transition tr;
        tr.timestep = j.at("t").get<int>();
        tr.state = state_from_json(j.at("state"), kind);
        tr.policy_action = action_from_json(j.at("policy_action"), 3);
        tr.executed_action = action_from_json(j.at("executed_action"), 3);
        tr.env_reward = j.at("r_env").get<double>();
        tr.shaped_reward = j.at("r_shaped").get<double>();
        tr.done = j.at("done").get<bool>();
        record(*current, std::move(tr));
    }
    return file;
}

} // namespace ultra
