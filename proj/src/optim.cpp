#include "stgn/optim.hpp"

#include <cmath>

#include "stgn/error.hpp"

namespace stgn {

AdamW::AdamW(ParamStore& ps, AdamWConfig cfg) : ps_(&ps), cfg_(cfg) {
    for (const auto& e : ps.entries()) {
        Slot s;
        s.name = e.name;
        s.m.assign(e.tensor.size(), 0.0);
        s.v.assign(e.tensor.size(), 0.0);
        slots_.push_back(std::move(s));
    }
}

void AdamW::step() {
    t_ += 1;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    auto& entries = ps_->entries();
    if (entries.size() != slots_.size()) throw ConfigError("AdamW: parameter store changed size");
    double clip_scale = 1.0;
    if (cfg_.clip_norm > 0.0) {
        double gsq = 0.0;
        for (const auto& e : entries) {
            if (!e.tensor.requires_grad()) continue;
            for (double g : e.tensor.grad()) gsq += g * g;
        }
        const double norm = std::sqrt(gsq);
        if (norm > cfg_.clip_norm) clip_scale = cfg_.clip_norm / norm;
    }
    for (std::size_t i = 0; i < entries.size(); ++i) {
        Tensor& p = entries[i].tensor;
        if (!p.requires_grad()) continue;
        const auto& g = p.grad();
        Slot& s = slots_[i];
        auto& w = p.raw();
        for (std::size_t j = 0; j < w.size(); ++j) {
            const double gj = g[j] * clip_scale;
            w[j] -= cfg_.lr * cfg_.weight_decay * w[j];
            s.m[j] = cfg_.beta1 * s.m[j] + (1.0 - cfg_.beta1) * gj;
            s.v[j] = cfg_.beta2 * s.v[j] + (1.0 - cfg_.beta2) * gj * gj;
            const double mhat = s.m[j] / bc1;
            const double vhat = s.v[j] / bc2;
            w[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
        }
    }
}

}  // namespace stgn
