#pragma once

// Rectified-flow machinery: the linear noise schedule, path interpolation,
// the flow-matching objective, deterministic Euler sampling with inpainting
// compositing, and inversion of a reference image into per-step attention
// caches for style injection.

#include <functional>
#include <vector>

#include "stgn/ops.hpp"
#include "stgn/rng.hpp"
#include "stgn/tensor.hpp"

namespace stgn::flow {

struct FlowSchedule {
    int num_steps = 50;
    std::function<double(double)> sigma_fn;   // defaults to linear sigma_t = t
    std::function<double(double)> weight_fn;  // defaults to omega_t = 1

    static FlowSchedule linear(int num_steps = 50);

    double sigma(double t) const;
    double weight(double t) const;

    // Sampling times t_s = 1 - s/num_steps for s = 0..num_steps. Both
    // euler_sample and invert read this one grid so their steps align.
    std::vector<double> time_grid() const;
};

struct FlowState {
    Tensor x0;
    Tensor eps;
    double t = 0.0;
    Tensor xt;
};

// Velocity field evaluated during sampling; `step` is the sampling step
// index (0 at pure noise). Conditioning is bound by the caller.
using VelocityFn = std::function<Tensor(const Tensor& xt, double t, int step)>;

// Records every denoiser layer's (K, V) for a state at time t; bound to the
// reference's own conditioning by the caller.
struct KvPair {
    Tensor k, v;
};
using TraceFn = std::function<std::vector<KvPair>(const Tensor& xt, double t)>;

struct InversionCache {
    // Recording order: ascending toward noise, so steps.back() is t = 1.
    std::vector<std::vector<KvPair>> steps;
    Tensor style_token_mask;
    int steps_recorded = 0;

    // Cache for sampling step s (s = 0 at pure noise).
    const std::vector<KvPair>& at_sampling_step(int s) const;
};

double sigma(double t);

FlowState interpolate(const Tensor& x0, const Tensor& eps, double t);

Tensor cfm_loss(const Tensor& v_pred, const FlowState& state, const FlowSchedule& schedule);

Tensor predict_clean(const Tensor& xt, const Tensor& v, double t);

// Deterministic Euler integration t: 1 -> 0. `known` holds the known pixels
// and `keep_mask` is 1 where the model generates; outside it the state is
// reset to `known` after every step (and at initialization). Shapes of
// known/keep_mask must match the state.
Tensor euler_sample(const VelocityFn& model, const Tensor& known, const Tensor& keep_mask,
                    const FlowSchedule& schedule, Rng& rng);

// Forward ODE t: 0 -> 1 from x_ref using the model's own velocity, recording
// (K, V) at the first `gate` sampling times via `trace`. Rows of the cached
// K/V outside style_token_mask are zeroed.
InversionCache invert(const VelocityFn& model, const TraceFn& trace, const Tensor& x_ref,
                      const FlowSchedule& schedule, int gate, const Tensor& style_token_mask);

}  // namespace stgn::flow
