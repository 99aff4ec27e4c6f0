#pragma once

#include <cstdio>
#include <optional>
#include <string>

#include "ultra/hopper.hpp"
#include "ultra/mdp.hpp"
#include "ultra/pong.hpp"

namespace ultra {

struct StateDescription {
    int timestep = 0;
    std::string text;
};

namespace detail {
inline std::string fixed4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}
} // namespace detail

// Deterministic template substitution; integers for Pong, 4 decimals for
// hopper-lite. The Pong template is parseable back to the numeric tuple.
inline StateDescription describe_state(const std::string& env_kind, const Transition& tr) {
    StateDescription d;
    d.timestep = tr.timestep;
    if (env_kind == "pong") {
        PongState s = pong_from_state(tr.state);
        char buf[256];
        std::snprintf(buf, sizeof(buf),
                      "timeslot %d: our racket {%d, %d, %d, %d}, opponent racket {%d, %d, %d, %d}, "
                      "ball {%d, %d}, action %s, reward %d",
                      tr.timestep, s.our_min_x, s.our_max_x(), kOurRowMin, kOurRowMin + 1,
                      s.opp_min_x, s.opp_max_x(), kOppRowMin, kOppRowMin + 1, s.ball_x, s.ball_y,
                      pong_action_name(tr.executed_action.index),
                      static_cast<int>(tr.env_reward));
        d.text = buf;
    } else {
        static const char* labels[kHopperDim] = {
            "torso x",        "torso height",       "pitch",
            "horizontal velocity", "vertical velocity", "pitch velocity",
            "hip angle",      "hip angular velocity", "knee angle",
            "knee angular velocity", "ankle angle"};
        std::string text = "timeslot " + std::to_string(tr.timestep) + ":";
        for (int i = 0; i < kHopperDim; ++i) {
            text += std::string(i == 0 ? " " : ", ") + labels[i] + " " +
                    detail::fixed4(tr.state.vec.at(i));
        }
        text += ", action {";
        for (std::size_t i = 0; i < tr.executed_action.vec.size(); ++i)
            text += (i == 0 ? "" : ", ") + detail::fixed4(tr.executed_action.vec[i]);
        text += "}, reward " + detail::fixed4(tr.env_reward);
        d.text = text;
    }
    return d;
}

struct PongDescriptionFields {
    int timestep;
    int our_min_x, our_max_x;
    int opp_min_x, opp_max_x;
    int ball_x, ball_y;
    std::string action;
    int reward;
};

// Inverse of the Pong template; used by the round-trip checks.
inline std::optional<PongDescriptionFields> parse_pong_description(const std::string& text) {
    PongDescriptionFields f;
    char action[32];
    int oy0, oy1, py0, py1;
    int n = std::sscanf(text.c_str(),
                        "timeslot %d: our racket {%d, %d, %d, %d}, opponent racket "
                        "{%d, %d, %d, %d}, ball {%d, %d}, action %31[a-z ], reward %d",
                        &f.timestep, &f.our_min_x, &f.our_max_x, &oy0, &oy1, &f.opp_min_x,
                        &f.opp_max_x, &py0, &py1, &f.ball_x, &f.ball_y, action, &f.reward);
    if (n != 13) return std::nullopt;
    f.action = action;
    // %[a-z ] is greedy and eats the trailing space before "reward"
    while (!f.action.empty() && f.action.back() == ' ') f.action.pop_back();
    return f;
}

} // namespace ultra
