#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace ultra {

// Counter-based generator: every draw is a stateless mix of
// (seed, stream, counter), so streams can be split per (episode, purpose)
// without sharing state. Identical seeds give identical sequences on any
// platform; no <random> distributions are used anywhere.
class RngStream {
public:
    RngStream() : RngStream(0, 0) {}
    explicit RngStream(std::uint64_t seed, std::uint64_t stream = 0)
        : seed_(seed), stream_(stream), counter_(0) {}

    // Derive an independent stream for a sub-purpose.
    RngStream split(std::uint64_t substream) const {
        return RngStream(seed_, mix(stream_ + 0x9e3779b97f4a7c15ull, substream));
    }

    std::uint64_t next_u64() {
        return mix(mix(seed_, stream_), counter_++);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return next_u64() % n;
    }

    // Standard normal via Box-Muller; consumes exactly two draws.
    double next_normal() {
        double u1 = next_double();
        double u2 = next_double();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    // Index drawn from unnormalized non-negative weights.
    std::size_t next_categorical(const std::vector<double>& weights) {
        double total = 0.0;
        for (double w : weights) total += w;
        double u = next_double() * total;
        double acc = 0.0;
        for (std::size_t i = 0; i + 1 < weights.size(); ++i) {
            acc += weights[i];
            if (u < acc) return i;
        }
        return weights.empty() ? 0 : weights.size() - 1;
    }

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

private:
    // splitmix64 finalizer over a combined key
    static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
        std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t stream_;
    std::uint64_t counter_;
};

} // namespace ultra
