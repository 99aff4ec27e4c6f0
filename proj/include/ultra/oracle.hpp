#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "ultra/annotations.hpp"
#include "ultra/describe.hpp"
#include "ultra/pong.hpp"
#include "ultra/prompts.hpp"

namespace ultra {

struct OracleParams {
    double hopper_height_margin = 0.05;
    double hopper_pitch_margin = 0.10;
    double hopper_action_tolerance = 0.30;
};

namespace oracle_detail {

struct ParsedPongStep {
    PongState state; // velocity filled in by inference
    int action = 0;
    bool has_velocity = false;
};

inline int action_index(const std::string& name) {
    if (name == "move left") return 1;
    if (name == "move right") return 2;
    return 0;
}

inline std::vector<ParsedPongStep> parse_pong_lines(const std::string& text, int& begin) {
    std::vector<ParsedPongStep> steps;
    std::istringstream in(text);
    std::string line;
    begin = -1;
    while (std::getline(in, line)) {
        auto f = parse_pong_description(line);
        if (!f) continue;
        ParsedPongStep st;
        st.state.our_min_x = f->our_min_x;
        st.state.opp_min_x = f->opp_min_x;
        st.state.ball_x = f->ball_x;
        st.state.ball_y = f->ball_y;
        st.action = action_index(f->action);
        if (begin < 0) begin = f->timestep;
        steps.push_back(st);
    }
    return steps;
}

// Racket move command reproducing an observed span shift (clamping means a
// command may produce no shift; the shift direction is what matters here).
inline int move_command(int from_min_x, int to_min_x) {
    if (to_min_x < from_min_x) return static_cast<int>(PongAction::MoveLeft);
    if (to_min_x > from_min_x) return static_cast<int>(PongAction::MoveRight);
    return static_cast<int>(PongAction::Stay);
}

// Reconstruct the ball velocity at each parsed step by searching the small
// velocity grid for the candidate whose one-step simulation under the real
// dynamics reproduces the next observed ball position.
inline void infer_velocities(std::vector<ParsedPongStep>& steps) {
    for (std::size_t t = 0; t + 1 < steps.size(); ++t) {
        const auto& cur = steps[t];
        const auto& nxt = steps[t + 1];
        bool found = false;
        for (int vx = -2; vx <= 2 && !found; ++vx) {
            for (int vy = -2; vy <= 2 && !found; ++vy) {
                if (vy == 0) continue;
                PongState s = cur.state;
                s.ball_vx = vx;
                s.ball_vy = vy;
                int opp_cmd = move_command(cur.state.opp_min_x, nxt.state.opp_min_x);
                PongStepOutcome out = pong_step(s, cur.action, opp_cmd);
                if (out.state.ball_x == nxt.state.ball_x &&
                    out.state.ball_y == nxt.state.ball_y) {
                    steps[t].state.ball_vx = vx;
                    steps[t].state.ball_vy = vy;
                    steps[t].has_velocity = true;
                    // propagate so the final step inherits a velocity estimate
                    steps[t + 1].state.ball_vx = out.state.ball_vx;
                    steps[t + 1].state.ball_vy = out.state.ball_vy;
                    steps[t + 1].has_velocity = true;
                    found = true;
                }
            }
        }
        if (!found && steps[t].has_velocity) {
            // carry the previous estimate through an unexplained step
            steps[t + 1].state.ball_vx = steps[t].state.ball_vx;
            steps[t + 1].state.ball_vy = steps[t].state.ball_vy;
            steps[t + 1].has_velocity = true;
        }
    }
}

struct Intercept {
    int column = 0;
    int steps_to_arrival = 0;
};

// Ball-only forward simulation (x-wall reflections, no rackets) until the
// ball reaches our contact row. Requires an incoming ball (vy > 0).
inline std::optional<Intercept> intercept_column(int x, int y, int vx, int vy) {
    if (vy <= 0) return std::nullopt;
    Intercept out;
    int steps = 0;
    while (y < kOurContactRow && steps < 4 * kPongGrid) {
        x += vx;
        y += vy;
        if (x < 0) {
            x = -x;
            vx = -vx;
        } else if (x > kPongGrid) {
            x = 2 * kPongGrid - x;
            vx = -vx;
        }
        ++steps;
    }
    out.column = x;
    out.steps_to_arrival = steps;
    return out;
}

inline int span_distance(int min_x, int column) {
    if (column < min_x) return min_x - column;
    int max_x = min_x + kRacketWidth - 1;
    if (column > max_x) return column - max_x;
    return 0;
}

inline int optimal_action(int min_x, int column) {
    if (column < min_x) return static_cast<int>(PongAction::MoveLeft);
    if (column > min_x + kRacketWidth - 1) return static_cast<int>(PongAction::MoveRight);
    return static_cast<int>(PongAction::Stay);
}

inline CriticalAnnotation annotate_pong_step(const ParsedPongStep& step, int timeslot) {
    CriticalAnnotation ann;
    ann.timeslot = timeslot;
    auto icept = step.has_velocity
                     ? intercept_column(step.state.ball_x, step.state.ball_y,
                                        step.state.ball_vx, step.state.ball_vy)
                     : std::nullopt;
    if (!icept) {
        ann.critical = false;
        ann.explanation = "ball moving toward the opponent; the agent has freedom here";
        return ann;
    }
    ann.critical = true;
    int best = optimal_action(step.state.our_min_x, icept->column);
    if (best != step.action) ann.corrected_action = Action::discrete(best, 3);
    ann.explanation = "ball incoming; intercept column " + std::to_string(icept->column) +
                      " in " + std::to_string(icept->steps_to_arrival) + " steps; " +
                      (best == step.action ? "agent action is proper"
                                           : std::string("agent should ") +
                                                 pong_action_name(best));
    return ann;
}

// --- hopper-lite ------------------------------------------------------------

struct ParsedHopperStep {
    int timeslot = 0;
    std::vector<double> state;
    std::vector<double> action;
};

inline std::vector<ParsedHopperStep> parse_hopper_lines(const std::string& text) {
    std::vector<ParsedHopperStep> steps;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        ParsedHopperStep st;
        st.state.resize(kHopperDim);
        st.action.resize(3);
        double reward;
        int n = std::sscanf(
            line.c_str(),
            "timeslot %d: torso x %lf, torso height %lf, pitch %lf, horizontal velocity "
            "%lf, vertical velocity %lf, pitch velocity %lf, hip angle %lf, hip angular "
            "velocity %lf, knee angle %lf, knee angular velocity %lf, ankle angle %lf, "
            "action {%lf, %lf, %lf}, reward %lf",
            &st.timeslot, &st.state[0], &st.state[1], &st.state[2], &st.state[3],
            &st.state[4], &st.state[5], &st.state[6], &st.state[7], &st.state[8],
            &st.state[9], &st.state[10], &st.action[0], &st.action[1], &st.action[2],
            &reward);
        if (n == 16) steps.push_back(std::move(st));
    }
    return steps;
}

// Torque that pushes the torso up and counteracts the current pitch.
inline std::vector<double> restoring_torque(double pitch) {
    auto clamp1 = [](double v) { return std::clamp(v, -1.0, 1.0); };
    return {clamp1(0.9 - 1.5 * pitch), 1.0, clamp1(0.9 + 1.5 * pitch)};
}

inline double linf(const std::vector<double>& a, const std::vector<double>& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

inline CriticalAnnotation annotate_hopper_step(const ParsedHopperStep& step,
                                               const OracleParams& params) {
    CriticalAnnotation ann;
    ann.timeslot = step.timeslot;
    double height = step.state[kTorsoHeight];
    double pitch = step.state[kPitch];
    bool near_fall = height < kHopperFallHeight + params.hopper_height_margin;
    bool near_tip = std::abs(pitch) > kHopperMaxPitch - params.hopper_pitch_margin;
    if (!near_fall && !near_tip) {
        ann.critical = false;
        ann.explanation = "torso height and pitch are well inside the safe region";
        return ann;
    }
    ann.critical = true;
    std::vector<double> desired = restoring_torque(pitch);
    if (linf(step.action, desired) > params.hopper_action_tolerance)
        ann.corrected_action = Action::continuous(desired);
    ann.explanation = near_fall ? "torso height close to the fall threshold; apply upward thrust"
                                : "pitch close to the termination angle; apply restoring torque";
    return ann;
}

} // namespace oracle_detail

// Deterministic scripted advisor emitting the same output grammar as the
// LLM backend. Pong is handled analytically via intercept prediction;
// hopper-lite heuristically via threshold margins.
inline std::string oracle_respond(const std::string& env_kind, const AdvisorPrompt& prompt,
                                  const OracleParams& params = {}) {
    using namespace oracle_detail;
    if (env_kind != "pong" && env_kind != "hopper-lite")
        throw OracleUnsupportedEnvError("oracle: unsupported environment " + env_kind);

    if (env_kind == "pong") {
        int begin = 0;
        auto steps = parse_pong_lines(prompt.rendered_text, begin);
        if (steps.empty())
            throw ParseError("oracle: no state descriptions found in prompt");
        infer_velocities(steps);

        if (prompt.kind == PromptKind::Identification ||
            prompt.kind == PromptKind::CaseAnalysis) {
            std::vector<CriticalAnnotation> annotations;
            for (std::size_t i = 0; i < steps.size(); ++i)
                annotations.push_back(
                    annotate_pong_step(steps[i], begin + static_cast<int>(i)));
            if (prompt.kind == PromptKind::Identification)
                return render_annotations(annotations);

            int critical = 0, improper = 0;
            std::string slots;
            for (const auto& a : annotations) {
                if (!a.critical) continue;
                ++critical;
                if (a.corrected_action) ++improper;
                slots += "{timeslot " + std::to_string(a.timeslot) + ", critical}, ";
            }
            std::string analysis = slots;
            analysis += "The episode contains " + std::to_string(critical) +
                        " critical states, of which " + std::to_string(improper) +
                        " had improper actions that moved the racket away from the ball's "
                        "intercept column or failed to move toward it. Actions that close "
                        "the gap to the intercept column should receive positive reward; "
                        "actions that widen it should be penalized.";
            return analysis;
        }

        // reward generation: score the executed action by intercept progress
        const auto& step = steps.front();
        auto icept = step.has_velocity
                         ? intercept_column(step.state.ball_x, step.state.ball_y,
                                            step.state.ball_vx, step.state.ball_vy)
                         : std::nullopt;
        double reward = 0.0;
        std::string analysis;
        if (!icept) {
            analysis = "ball moving toward the opponent; the action has little impact";
        } else {
            int before = span_distance(step.state.our_min_x, icept->column);
            int shifted = detail::shift_racket(step.state.our_min_x, step.action);
            int after = span_distance(shifted, icept->column);
            if (after == 0) {
                reward = 1.0;
                analysis = "the racket covers the intercept column " +
                           std::to_string(icept->column);
            } else {
                reward = std::clamp((before - after) / 2.0, -1.0, 1.0);
                analysis = reward > 0
                               ? "the action closes the gap to the intercept column"
                               : (reward < 0
                                      ? "the action widens the gap to the intercept column"
                                      : "the action leaves the gap to the intercept column "
                                        "unchanged");
            }
        }
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.1f", reward);
        return "{reward = " + std::string(buf) + ", analysis: " + analysis + "}";
    }

    // hopper-lite
    auto steps = parse_hopper_lines(prompt.rendered_text);
    if (steps.empty()) throw ParseError("oracle: no state descriptions found in prompt");

    if (prompt.kind == PromptKind::Identification || prompt.kind == PromptKind::CaseAnalysis) {
        std::vector<CriticalAnnotation> annotations;
        for (const auto& s : steps)
            annotations.push_back(annotate_hopper_step(s, params));
        if (prompt.kind == PromptKind::Identification) return render_annotations(annotations);
        int critical = 0;
        for (const auto& a : annotations) critical += a.critical ? 1 : 0;
        return "The trajectory contains " + std::to_string(critical) +
               " critical states near the fall or pitch thresholds. Torque that restores "
               "height and levels the pitch should be rewarded; torque that drives the "
               "torso toward a termination threshold should be penalized.";
    }

    const auto& step = steps.front();
    std::vector<double> desired = oracle_detail::restoring_torque(step.state[kPitch]);
    double reward = std::clamp(1.0 - oracle_detail::linf(step.action, desired), -1.0, 1.0);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", reward);
    return "{reward = " + std::string(buf) +
           ", analysis: distance of the applied torque from the restoring torque}";
}

} // namespace ultra
