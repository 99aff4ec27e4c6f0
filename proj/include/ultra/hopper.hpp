#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ultra/env.hpp"
#include "ultra/pong.hpp"

namespace ultra {

// Minimal continuous "hopper-lite": a smooth surrogate of the one-legged
// hopper that keeps only the reward structure, 11-component state layout,
// [-1,1]^3 torque range, and termination thresholds. Dynamics are an explicit
// Euler integration of a point-mass torso:
//
//   u      = (a_hip + a_knee) / 2                        (hop thrust)
//   h'     = h + dt * vh
//   vh'    = vh + dt * (14 u - 9.8 - 0.8 vh + 6 (h_rest - h))
//   p'     = p + dt * vp
//   vp'    = vp + dt * (2 (a_hip - a_ankle) - 4 p - vp)
//   vx'    = vx + dt * (3 a_knee - 0.5 vx - 2 p)
//   x'     = x + dt * vx
//   hip'   = hip + dt * hipv;   hipv' = hipv + dt * (6 a_hip - 8 hip - hipv)
//   knee'  = knee + dt * kneev; kneev' = kneev + dt * (6 a_knee - 8 knee - kneev)
//   ankle' = ankle + dt * (2 a_ankle - 1.5 ankle)
//
// with dt = 0.05 and rest height h_rest = 1.25. Zero thrust cannot hold the
// torso above the 0.7 m fall threshold, so staying alive requires sustained
// positive hip/knee torque.
//
// reward = vx + 1.0 - 0.001 * ||a||^2, with vx read before integration.
// done when h < 0.7 or |pitch| > 0.628 or the step limit is reached.

enum HopperIndex {
    kTorsoX = 0,
    kTorsoHeight = 1,
    kPitch = 2,
    kVelX = 3,
    kVelH = 4,
    kVelPitch = 5,
    kHip = 6,
    kHipVel = 7,
    kKnee = 8,
    kKneeVel = 9,
    kAnkle = 10,
    kHopperDim = 11
};

inline constexpr double kHopperDt = 0.05;
inline constexpr double kHopperRestHeight = 1.25;
inline constexpr double kHopperFallHeight = 0.7;
inline constexpr double kHopperMaxPitch = 0.628;

struct HopperConfig {
    int step_limit = 200;
    double reset_angle_noise = 0.005;
};

struct HopperStepOutcome {
    std::vector<double> state;
    double reward = 0.0;
    bool done = false;
    TerminalReason reason = TerminalReason::StepLimit;
    bool torque_clamped = false;
};

inline double hopper_reward(const std::vector<double>& state, const std::vector<double>& torque) {
    double control = 0.0;
    for (double a : torque) control += a * a;
    return state[kVelX] + 1.0 - 0.001 * control;
}

inline HopperStepOutcome hopper_lite_step(const std::vector<double>& s,
                                          const std::vector<double>& torque_in) {
    HopperStepOutcome out;
    std::vector<double> a = torque_in;
    for (double& t : a) {
        if (t < -1.0 || t > 1.0) {
            t = std::clamp(t, -1.0, 1.0);
            out.torque_clamped = true;
        }
    }
    out.reward = hopper_reward(s, a);

    const double u = 0.5 * (a[0] + a[1]);
    std::vector<double> n(kHopperDim);
    n[kTorsoX] = s[kTorsoX] + kHopperDt * s[kVelX];
    n[kTorsoHeight] = s[kTorsoHeight] + kHopperDt * s[kVelH];
    n[kPitch] = s[kPitch] + kHopperDt * s[kVelPitch];
    n[kVelX] = s[kVelX] + kHopperDt * (3.0 * a[1] - 0.5 * s[kVelX] - 2.0 * s[kPitch]);
    n[kVelH] = s[kVelH] +
               kHopperDt * (14.0 * u - 9.8 - 0.8 * s[kVelH] + 6.0 * (kHopperRestHeight - s[kTorsoHeight]));
    n[kVelPitch] = s[kVelPitch] + kHopperDt * (2.0 * (a[0] - a[2]) - 4.0 * s[kPitch] - s[kVelPitch]);
    n[kHip] = s[kHip] + kHopperDt * s[kHipVel];
    n[kHipVel] = s[kHipVel] + kHopperDt * (6.0 * a[0] - 8.0 * s[kHip] - s[kHipVel]);
    n[kKnee] = s[kKnee] + kHopperDt * s[kKneeVel];
    n[kKneeVel] = s[kKneeVel] + kHopperDt * (6.0 * a[1] - 8.0 * s[kKnee] - s[kKneeVel]);
    n[kAnkle] = s[kAnkle] + kHopperDt * (2.0 * a[2] - 1.5 * s[kAnkle]);

    if (n[kTorsoHeight] < kHopperFallHeight || std::abs(n[kPitch]) > kHopperMaxPitch) {
        out.done = true;
        out.reason = TerminalReason::Failure;
    }
    out.state = std::move(n);
    return out;
}

class HopperLiteEnv : public Env {
public:
    explicit HopperLiteEnv(HopperConfig config = {}) : config_(config) {}

    std::string name() const override { return "hopper-lite"; }
    State::Kind state_kind() const override { return State::Kind::ContinuousVector; }
    Action::Kind action_kind() const override { return Action::Kind::Continuous; }
    int obs_dim() const override { return kHopperDim; }
    int action_arity() const override { return 0; }
    int action_dim() const override { return 3; }

    State reset(std::uint64_t seed) override {
        RngStream init(seed, 0x401);
        state_.assign(kHopperDim, 0.0);
        state_[kTorsoHeight] = kHopperRestHeight;
        // noise only on joint angles so the rest pose stays exact
        for (int idx : {kHip, kKnee, kAnkle})
            state_[idx] = (2.0 * init.next_double() - 1.0) * config_.reset_angle_noise;
        steps_ = 0;
        done_ = false;
        return current_state();
    }

    StepResult step(const Action& action) override {
        if (done_) throw TerminalMisuseError("hopper-lite: step after terminal state");
        check_action(action);
        HopperStepOutcome out = hopper_lite_step(state_, action.vec);
        if (out.torque_clamped) ++clamp_warnings_;
        state_ = out.state;
        steps_ += 1;

        StepResult result;
        result.reward = out.reward;
        result.done = out.done;
        result.reason = out.reason;
        if (!result.done && steps_ >= config_.step_limit) {
            result.done = true;
            result.reason = TerminalReason::StepLimit;
        }
        done_ = result.done;
        result.state = current_state();
        return result;
    }

    State current_state() const override {
        State st;
        st.kind = State::Kind::ContinuousVector;
        st.vec = state_;
        return st;
    }

    bool terminal() const override { return done_; }

    std::vector<double> observe(const State& state) const override { return state.vec; }

    int clamp_warnings() const { return clamp_warnings_; }
    const HopperConfig& config() const { return config_; }

private:
    HopperConfig config_;
    std::vector<double> state_;
    int steps_ = 0;
    bool done_ = false;
    int clamp_warnings_ = 0;
};

inline std::unique_ptr<Env> make_env(const std::string& name) {
    if (name == "pong") return std::make_unique<PongEnv>();
    if (name == "hopper-lite") return std::make_unique<HopperLiteEnv>();
    throw ConfigError("unknown environment: " + name);
}

} // namespace ultra
