#pragma once

#include <cmath>
#include <cstddef>
#include <cstring>
#include <limits>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ultra/annotations.hpp"
#include "ultra/mdp.hpp"

namespace ultra {

namespace detail {

inline double state_linf_distance(const State& a, const State& b) {
    if (a.vec.size() != b.vec.size()) return std::numeric_limits<double>::infinity();
    double d = 0.0;
    for (std::size_t i = 0; i < a.vec.size(); ++i)
        d = std::max(d, std::abs(a.vec[i] - b.vec[i]));
    return d;
}

inline std::string state_key(const State& s) {
    // exact-match key; canonical because states come from integer grids or
    // bit-identical replay of the same dynamics
    std::string key;
    if (s.kind == State::Kind::DiscreteGrid) {
        for (const auto& span : s.spans)
            for (int v : span) key += std::to_string(v) + ",";
    } else {
        key.resize(s.vec.size() * sizeof(double));
        std::memcpy(key.data(), s.vec.data(), key.size());
    }
    return key;
}

} // namespace detail

// State-keyed table. Discrete-grid states match exactly; continuous states
// match the nearest stored key within an L-inf ball of radius epsilon (ties
// broken by smallest distance, then earliest insertion). epsilon = 0
// degenerates to exact matching for both kinds.
template <typename V>
class LookupTable {
public:
    void insert(const State& state, V value) {
        // most-recent-wins on duplicate keys
        std::string key = detail::state_key(state);
        auto it = index_.find(key);
        if (it != index_.end()) {
            entries_[it->second].value = std::move(value);
            return;
        }
        index_.emplace(std::move(key), entries_.size());
        entries_.push_back({state, std::move(value)});
    }

    const V* find(const State& query, double epsilon) const {
        auto it = index_.find(detail::state_key(query));
        if (it != index_.end()) return &entries_[it->second].value;
        if (query.kind != State::Kind::ContinuousVector || epsilon <= 0.0) return nullptr;
        const V* best = nullptr;
        double best_dist = epsilon;
        for (const auto& e : entries_) {
            double d = detail::state_linf_distance(query, e.state);
            if (d < best_dist || (best == nullptr && d <= best_dist)) {
                best = &e.value;
                best_dist = d;
            }
        }
        return best;
    }

    std::size_t size() const { return entries_.size(); }
    bool empty() const { return entries_.empty(); }

    struct Entry {
        State state;
        V value;
    };
    const std::vector<Entry>& entries() const { return entries_; }

private:
    std::vector<Entry> entries_;
    std::unordered_map<std::string, std::size_t> index_;
};

using ActionLookupTable = LookupTable<Action>;

// Build the corrected-action table T from annotated trajectories. Annotations
// that are non-critical or carry no corrected action contribute nothing; an
// annotation whose (episode, timeslot) has no matching transition is an error.
inline ActionLookupTable build_lookup(
    const std::vector<Trajectory>& trajectories,
    const std::vector<std::pair<int, CriticalAnnotation>>& annotations) {
    std::unordered_map<long long, const Transition*> by_position;
    for (const auto& traj : trajectories)
        for (const auto& tr : traj.transitions)
            by_position[(static_cast<long long>(traj.episode_id) << 20) | tr.timestep] = &tr;

    ActionLookupTable table;
    for (const auto& [episode, ann] : annotations) {
        auto it = by_position.find((static_cast<long long>(episode) << 20) | ann.timeslot);
        if (it == by_position.end())
            throw DanglingAnnotationError("annotation for episode " + std::to_string(episode) +
                                          ", timeslot " + std::to_string(ann.timeslot) +
                                          " has no matching transition");
        if (!ann.critical || !ann.corrected_action) continue;
        table.insert(it->second->state, *ann.corrected_action);
    }
    return table;
}

} // namespace ultra
