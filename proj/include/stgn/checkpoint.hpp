#pragma once

// Binary checkpoint format: "STGN" magic, version, config hash, RNG state,
// a named-tensor directory with offsets, a little-endian float64 payload,
// and optional optimizer moment state. Round trips are bit-exact.

#include <cstdint>
#include <string>

#include "stgn/optim.hpp"
#include "stgn/params.hpp"
#include "stgn/rng.hpp"

namespace stgn {

struct CheckpointMeta {
    std::uint32_t version = 1;
    std::string config_hash;
    std::uint64_t step = 0;
    Rng::State rng{};
    bool has_optimizer = false;
};

void save_checkpoint(const std::string& path, const ParamStore& ps, const CheckpointMeta& meta,
                     const AdamW* opt = nullptr);

// Fills `ps` (adding entries, or verifying shapes when names already exist)
// and optionally the optimizer moments. Throws IoError on malformed files and
// ConfigError on shape or layout mismatches.
CheckpointMeta load_checkpoint(const std::string& path, ParamStore& ps, AdamW* opt = nullptr);

}  // namespace stgn
