#pragma once

#include <vector>

#include "ultra/errors.hpp"

namespace ultra {

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns;
};

// advantage_t = sum_k (gamma*lambda)^k * delta_{t+k},
// delta_t = r_t + gamma * V_{t+1} - V_t, with V after the last step given by
// last_value (0 for terminal episodes). returns = advantages + values.
inline GaeResult gae(const std::vector<double>& rewards, const std::vector<double>& values,
                     double last_value, double gamma, double lambda) {
    if (rewards.size() != values.size())
        throw ShapeMismatchError("gae: rewards and values must have equal length");
    const std::size_t n = rewards.size();
    GaeResult out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double running = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        double next_value = (i + 1 < n) ? values[i + 1] : last_value;
        double delta = rewards[i] + gamma * next_value - values[i];
        running = delta + gamma * lambda * running;
        out.advantages[i] = running;
        out.returns[i] = running + values[i];
    }
    return out;
}

} // namespace ultra
