#pragma once

// Adaptive-moment optimizer with decoupled weight decay over a ParamStore.
// Moment buffers live per parameter and serialize with checkpoints.

#include <cstdint>
#include <string>
#include <vector>

#include "stgn/params.hpp"

namespace stgn {

struct AdamWConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.01;
    // Global L2 gradient-norm clip applied across all trainable parameters
    // before the moment update; 0 disables.
    double clip_norm = 0.0;
};

class AdamW {
public:
    explicit AdamW(ParamStore& ps, AdamWConfig cfg = {});

    // One update from the accumulated grads of every trainable parameter.
    void step();

    const AdamWConfig& config() const { return cfg_; }
    void set_lr(double lr) { cfg_.lr = lr; }
    std::uint64_t steps_taken() const { return t_; }

    struct Slot {
        std::string name;
        std::vector<double> m, v;
    };
    const std::vector<Slot>& slots() const { return slots_; }
    std::vector<Slot>& slots() { return slots_; }
    void set_steps_taken(std::uint64_t t) { t_ = t; }

private:
    ParamStore* ps_;
    AdamWConfig cfg_;
    std::uint64_t t_ = 0;
    std::vector<Slot> slots_;
};

}  // namespace stgn
