#pragma once

#include <cstdint>
#include <cstddef>

namespace staged {

// Deterministic splittable pseudo-random stream (splitmix64 core).
//
// Every stochastic operation in the library takes one of these. Substreams
// are derived from (seed, tag...) so that independent units of work (runs,
// folds, bags, iterations) can be executed in any order, or in parallel,
// and still reproduce the sequential result bit for bit.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : state_(mix(seed ^ kInit)) {}

    // Derives an independent child stream. Children with distinct tags do
    // not overlap with each other or with the parent's output sequence.
    RngStream child(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
        std::uint64_t s = state_;
        s = mix(s ^ mix(a + 0x1d8e4e27c47d124fULL));
        s = mix(s ^ mix(b + 0x9e6c63d0a9dc2ab1ULL));
        s = mix(s ^ mix(c + 0x5851f42d4c957f2dULL));
        return RngStream(FromState{}, s);
    }

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        return mix(state_);
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform integer in [0, n). n must be > 0.
    std::size_t uniform_index(std::size_t n) {
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Standard normal via Box-Muller (one value per call, no cached state,
    // so interleaving with other draws stays reproducible).
    double normal() {
        double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53; // (0, 1]
        double u2 = uniform01();
        return box_muller(u1, u2);
    }

private:
    struct FromState {};
    RngStream(FromState, std::uint64_t s) : state_(s) {}

    static constexpr std::uint64_t kInit = 0xbf58476d1ce4e5b9ULL;

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static double box_muller(double u1, double u2);

    std::uint64_t state_;
};

} // namespace staged
