#pragma once

// Deterministic pseudorandom source. xoshiro256** seeded through splitmix64,
// Gaussian draws via Box-Muller. Identical seed + identical call sequence
// gives identical outputs on every platform; no libc distribution code is
// involved. Streams for independent consumers are derived with split().

#include <cstdint>

namespace stgn {

class Rng {
public:
    explicit Rng(std::uint64_t seed);

    // Derives an independent stream. split(k) from the same parent is stable
    // and distinct for distinct k; the parent's own sequence is unaffected.
    Rng split(std::uint64_t stream) const;

    std::uint64_t next_u64();
    double uniform();  // [0, 1)
    double normal();   // standard Gaussian

    std::uint64_t seed() const { return seed_; }

    // Full internal state, for checkpointing.
    struct State {
        std::uint64_t seed;
        std::uint64_t s[4];
        double spare;
        std::uint8_t has_spare;
    };
    State state() const;
    static Rng from_state(const State& st);

private:
    Rng() = default;
    std::uint64_t seed_ = 0;
    std::uint64_t s_[4] = {};
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace stgn
