#include "stgn/flow.hpp"

#include <cmath>
#include <string>

namespace stgn::flow {

namespace op = stgn::ops;

namespace {

void check_finite(const Tensor& x, const char* where, int step) {
    for (double v : x.data()) {
        if (!std::isfinite(v)) {
            throw NumericError(std::string(where) + ": non-finite state at step " + std::to_string(step));
        }
    }
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* where) {
    if (a.shape() != b.shape()) {
        throw ShapeError(std::string(where) + ": " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
    }
}

Tensor binarize(const Tensor& mask) {
    Tensor b = Tensor::zeros(mask.shape());
    for (std::size_t i = 0; i < mask.size(); ++i) b.raw()[i] = mask.data()[i] >= 0.5 ? 1.0 : 0.0;
    return b;
}

}  // namespace

FlowSchedule FlowSchedule::linear(int num_steps) {
    FlowSchedule s;
    s.num_steps = num_steps;
    return s;
}

double FlowSchedule::sigma(double t) const {
    if (t < 0.0 || t > 1.0) throw DomainError("sigma: t outside [0,1]: " + std::to_string(t));
    return sigma_fn ? sigma_fn(t) : t;
}

double FlowSchedule::weight(double t) const { return weight_fn ? weight_fn(t) : 1.0; }

std::vector<double> FlowSchedule::time_grid() const {
    std::vector<double> grid(num_steps + 1);
    for (int s = 0; s <= num_steps; ++s) grid[s] = 1.0 - static_cast<double>(s) / num_steps;
    return grid;
}

const std::vector<KvPair>& InversionCache::at_sampling_step(int s) const {
    if (s < 0 || s >= steps_recorded) throw DomainError("InversionCache: step " + std::to_string(s) + " not recorded");
    return steps[static_cast<std::size_t>(steps_recorded - 1 - s)];
}

double sigma(double t) { return FlowSchedule().sigma(t); }

FlowState interpolate(const Tensor& x0, const Tensor& eps, double t) {
    check_same_shape(x0, eps, "interpolate");
    const double s = sigma(t);
    FlowState st;
    st.x0 = x0;
    st.eps = eps;
    st.t = t;
    st.xt = op::add(op::scale(x0, 1.0 - s), op::scale(eps, s));
    return st;
}

Tensor cfm_loss(const Tensor& v_pred, const FlowState& state, const FlowSchedule& schedule) {
    check_same_shape(v_pred, state.x0, "cfm_loss");
    Tensor target = op::sub(state.eps, state.x0);
    return op::scale(op::mean_sq(op::sub(v_pred, target)), schedule.weight(state.t));
}

Tensor predict_clean(const Tensor& xt, const Tensor& v, double t) {
    check_same_shape(xt, v, "predict_clean");
    return op::sub(xt, op::scale(v, sigma(t)));
}

Tensor euler_sample(const VelocityFn& model, const Tensor& known, const Tensor& keep_mask,
                    const FlowSchedule& schedule, Rng& rng) {
    check_same_shape(known, keep_mask, "euler_sample");
    NoGradGuard ng;
    const auto grid = schedule.time_grid();
    const double dt = 1.0 / schedule.num_steps;

    Tensor hold = op::mul(op::sub(Tensor::full(keep_mask.shape(), 1.0), keep_mask), known);
    auto composite = [&](const Tensor& x) { return op::add(op::mul(keep_mask, x), hold); };

    Tensor x = composite(Tensor::randn(known.shape(), rng));
    for (int s = 0; s < schedule.num_steps; ++s) {
        Tensor v = model(x, grid[s], s);
        check_same_shape(v, x, "euler_sample velocity");
        x = composite(op::sub(x, op::scale(v, dt)));
        check_finite(x, "euler_sample", s);
    }
    return x;
}

InversionCache invert(const VelocityFn& model, const TraceFn& trace, const Tensor& x_ref,
                      const FlowSchedule& schedule, int gate, const Tensor& style_token_mask) {
    if (gate > schedule.num_steps || gate < 0) {
        throw ConfigError("invert: gate " + std::to_string(gate) + " outside [0, " +
                          std::to_string(schedule.num_steps) + "]");
    }
    NoGradGuard ng;
    InversionCache cache;
    cache.style_token_mask = style_token_mask;
    if (gate == 0) return cache;

    Tensor keep = binarize(style_token_mask);
    const int n = schedule.num_steps;
    const double dt = 1.0 / n;
    Tensor x = x_ref;
    for (int k = 0; k <= n; ++k) {
        const double t = static_cast<double>(k) * dt;
        if (k > n - gate) {
            std::vector<KvPair> layers = trace(x, t);
            for (auto& kv : layers) {
                kv.k = op::mul_colvec(kv.k, keep);
                kv.v = op::mul_colvec(kv.v, keep);
            }
            cache.steps.push_back(std::move(layers));
        }
        if (k < n) {
            Tensor v = model(x, t, k);
            check_same_shape(v, x, "invert velocity");
            x = op::add(x, op::scale(v, dt));
            check_finite(x, "invert", k);
        }
    }
    cache.steps_recorded = static_cast<int>(cache.steps.size());
    return cache;
}

}  // namespace stgn::flow
