#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ultra/mdp.hpp"

namespace ultra {

struct StepResult {
    State state;
    double reward = 0.0;
    bool done = false;
    TerminalReason reason = TerminalReason::StepLimit;
};

// Single-owner environment handle. reset() seeds a fresh episode; step()
// after a terminal transition throws TerminalMisuseError.
class Env {
public:
    virtual ~Env() = default;

    virtual std::string name() const = 0;
    virtual State::Kind state_kind() const = 0;
    virtual Action::Kind action_kind() const = 0;
    virtual int obs_dim() const = 0;
    // Discrete arity, or 0 for continuous environments.
    virtual int action_arity() const = 0;
    // Continuous action dimension, or 0 for discrete environments.
    virtual int action_dim() const = 0;

    virtual State reset(std::uint64_t seed) = 0;
    virtual StepResult step(const Action& action) = 0;
    virtual State current_state() const = 0;
    virtual bool terminal() const = 0;

    // Normalized observation vector fed to the policy network.
    virtual std::vector<double> observe(const State& state) const = 0;

protected:
    void check_action(const Action& action) const {
        if (action_kind() == Action::Kind::Discrete) {
            if (action.kind != Action::Kind::Discrete)
                throw TypeMismatchError(name() + ": expected a discrete action");
            if (action.index < 0 || action.index >= action_arity())
                throw TypeMismatchError(name() + ": discrete action index out of range");
        } else {
            if (action.kind != Action::Kind::Continuous)
                throw TypeMismatchError(name() + ": expected a continuous action");
            if (static_cast<int>(action.vec.size()) != action_dim())
                throw TypeMismatchError(name() + ": continuous action has wrong dimension");
        }
    }
};

} // namespace ultra
