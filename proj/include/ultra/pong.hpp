#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <string>
#include <vector>

#include "ultra/env.hpp"

namespace ultra {

// 80x80 grid Pong. Our racket occupies rows {70, 71}, the opponent's rows
// {8, 9}; both are 8 cells wide and move horizontally by 2 cells per step.
// The ball is a single cell with velocity components in {-2..2}; it reflects
// off the x-walls and off a racket when its column overlaps the racket span
// at the contact rows. A ball passing a baseline uncaught scores the point.
// One episode is a single point (serve to score).

inline constexpr int kPongGrid = 80;
inline constexpr int kRacketWidth = 8;
inline constexpr int kRacketMaxMinX = kPongGrid - 7; // 73
inline constexpr int kOurRowMin = 70;
inline constexpr int kOppRowMin = 8;
inline constexpr int kOurContactRow = 69;
inline constexpr int kOppContactRow = 10;
inline constexpr int kRacketSpeed = 2;

enum class PongAction : int { Stay = 0, MoveLeft = 1, MoveRight = 2 };

inline const char* pong_action_name(int index) {
    switch (index) {
        case 0: return "stay";
        case 1: return "move left";
        default: return "move right";
    }
}

struct PongState {
    int our_min_x = 36;
    int opp_min_x = 36;
    int ball_x = 40;
    int ball_y = 40;
    int ball_vx = 1;
    int ball_vy = 1;
    int our_score = 0;
    int opp_score = 0;

    int our_max_x() const { return our_min_x + kRacketWidth - 1; }
    int opp_max_x() const { return opp_min_x + kRacketWidth - 1; }
};

struct PongConfig {
    int points_to_win = 21;     // score cap tracked on the state
    int opponent_lag = 4;       // steps of delayed ball tracking; < 0 freezes the opponent
    int step_limit = 500;       // per-point step cap
    std::vector<int> serve_speeds = {1, 2};
};

// True iff the ball column lies on the racket's 8-cell span.
inline bool pong_catch_check(int ball_x, int racket_min_x) {
    return ball_x >= racket_min_x && ball_x <= racket_min_x + kRacketWidth - 1;
}

// Deterministic ball tracking toward a (possibly delayed) ball column,
// capped at the racket speed.
inline int pong_opponent_action(const PongState& state, int tracked_ball_x) {
    int center = state.opp_min_x + 3; // left-of-center reference cell
    if (tracked_ball_x < center) return static_cast<int>(PongAction::MoveLeft);
    if (tracked_ball_x > center + 1) return static_cast<int>(PongAction::MoveRight);
    return static_cast<int>(PongAction::Stay);
}

struct PongStepOutcome {
    PongState state;
    double reward = 0.0;
    bool done = false;
    TerminalReason reason = TerminalReason::StepLimit;
};

namespace detail {
inline int shift_racket(int min_x, int action) {
    if (action == static_cast<int>(PongAction::MoveLeft)) min_x -= kRacketSpeed;
    if (action == static_cast<int>(PongAction::MoveRight)) min_x += kRacketSpeed;
    return std::clamp(min_x, 0, kRacketMaxMinX);
}
} // namespace detail

// One physics step. opponent_action comes from pong_opponent_action (or a
// frozen opponent); both rackets move, then the ball advances and resolves
// wall bounces, catches, and scoring.
inline PongStepOutcome pong_step(const PongState& s, int agent_action, int opponent_action) {
    PongStepOutcome out;
    PongState n = s;

    int our_before = n.our_min_x;
    n.our_min_x = detail::shift_racket(n.our_min_x, agent_action);
    int our_move_dir = (n.our_min_x > our_before) - (n.our_min_x < our_before);

    int opp_before = n.opp_min_x;
    n.opp_min_x = detail::shift_racket(n.opp_min_x, opponent_action);
    int opp_move_dir = (n.opp_min_x > opp_before) - (n.opp_min_x < opp_before);

    n.ball_x += n.ball_vx;
    n.ball_y += n.ball_vy;
    if (n.ball_x < 0) {
        n.ball_x = -n.ball_x;
        n.ball_vx = -n.ball_vx;
    } else if (n.ball_x > kPongGrid) {
        n.ball_x = 2 * kPongGrid - n.ball_x;
        n.ball_vx = -n.ball_vx;
    }

    if (n.ball_vy > 0 && n.ball_y >= kOurContactRow) {
        if (n.ball_y <= kOurRowMin + 1 && pong_catch_check(n.ball_x, n.our_min_x)) {
            n.ball_y = 2 * kOurContactRow - n.ball_y;
            n.ball_vy = -n.ball_vy;
            n.ball_vx = std::clamp(n.ball_vx + our_move_dir, -2, 2);
        } else if (n.ball_y > kOurRowMin + 1) {
            n.opp_score += 1;
            out.state = n;
            out.reward = -1.0;
            out.done = true;
            out.reason = TerminalReason::Failure;
            return out;
        }
    } else if (n.ball_vy < 0 && n.ball_y <= kOppContactRow) {
        if (n.ball_y >= kOppRowMin && pong_catch_check(n.ball_x, n.opp_min_x)) {
            n.ball_y = 2 * kOppContactRow - n.ball_y;
            n.ball_vy = -n.ball_vy;
            n.ball_vx = std::clamp(n.ball_vx + opp_move_dir, -2, 2);
        } else if (n.ball_y < kOppRowMin) {
            n.our_score += 1;
            out.state = n;
            out.reward = 1.0;
            out.done = true;
            out.reason = TerminalReason::Goal;
            return out;
        }
    }

    out.state = n;
    return out;
}

inline State pong_to_state(const PongState& s) {
    State st;
    st.kind = State::Kind::DiscreteGrid;
    st.spans = {{s.our_min_x, s.our_max_x(), kOurRowMin, kOurRowMin + 1},
                {s.opp_min_x, s.opp_max_x(), kOppRowMin, kOppRowMin + 1},
                {s.ball_x, s.ball_x, s.ball_y, s.ball_y},
                {s.ball_vx, s.ball_vx, s.ball_vy, s.ball_vy}};
    return st;
}

inline PongState pong_from_state(const State& st) {
    PongState s;
    s.our_min_x = st.spans.at(0)[0];
    s.opp_min_x = st.spans.at(1)[0];
    s.ball_x = st.spans.at(2)[0];
    s.ball_y = st.spans.at(2)[2];
    s.ball_vx = st.spans.at(3)[0];
    s.ball_vy = st.spans.at(3)[2];
    return s;
}

class PongEnv : public Env {
public:
    explicit PongEnv(PongConfig config = {}) : config_(std::move(config)) {}

    std::string name() const override { return "pong"; }
    State::Kind state_kind() const override { return State::Kind::DiscreteGrid; }
    Action::Kind action_kind() const override { return Action::Kind::Discrete; }
    int obs_dim() const override { return 6; }
    int action_arity() const override { return 3; }
    int action_dim() const override { return 0; }

    State reset(std::uint64_t seed) override {
        RngStream serve(seed, 0xba11);
        state_ = PongState{};
        const auto& speeds = config_.serve_speeds;
        int sx = static_cast<int>(speeds[serve.next_below(speeds.size())]);
        int sy = static_cast<int>(speeds[serve.next_below(speeds.size())]);
        state_.ball_vx = serve.next_below(2) == 0 ? -sx : sx;
        state_.ball_vy = serve.next_below(2) == 0 ? -sy : sy;
        steps_ = 0;
        done_ = false;
        ball_x_history_.assign(std::max(config_.opponent_lag, 0) + 1, state_.ball_x);
        return pong_to_state(state_);
    }

    StepResult step(const Action& action) override {
        if (done_) throw TerminalMisuseError("pong: step after terminal state");
        check_action(action);

        int opp_action = static_cast<int>(PongAction::Stay);
        if (config_.opponent_lag >= 0)
            opp_action = pong_opponent_action(state_, ball_x_history_.front());

        PongStepOutcome out = pong_step(state_, action.index, opp_action);
        state_ = out.state;
        steps_ += 1;

        ball_x_history_.push_back(state_.ball_x);
        if (ball_x_history_.size() > static_cast<std::size_t>(std::max(config_.opponent_lag, 0) + 1))
            ball_x_history_.pop_front();

        StepResult result;
        result.reward = out.reward;
        result.done = out.done;
        result.reason = out.reason;
        if (!result.done && steps_ >= config_.step_limit) {
            result.done = true;
            result.reason = TerminalReason::StepLimit;
        }
        done_ = result.done;
        result.state = pong_to_state(state_);
        return result;
    }

    State current_state() const override { return pong_to_state(state_); }
    bool terminal() const override { return done_; }

    std::vector<double> observe(const State& state) const override {
        PongState s = pong_from_state(state);
        return {2.0 * s.our_min_x / kRacketMaxMinX - 1.0,
                2.0 * s.opp_min_x / kRacketMaxMinX - 1.0,
                2.0 * s.ball_x / kPongGrid - 1.0,
                2.0 * s.ball_y / kPongGrid - 1.0,
                s.ball_vx / 2.0,
                s.ball_vy / 2.0};
    }

    const PongConfig& config() const { return config_; }
    const PongState& raw_state() const { return state_; }

private:
    PongConfig config_;
    PongState state_;
    std::deque<int> ball_x_history_;
    int steps_ = 0;
    bool done_ = false;
};

} // namespace ultra
