#include "stgn/injection.hpp"

namespace stgn::injection {

namespace op = stgn::ops;

namespace {

constexpr double kMaskThreshold = 0.5;

bool mask_nonempty(const Tensor& m) {
    for (double v : m.data()) {
        if (v >= kMaskThreshold) return true;
    }
    return false;
}

void warn(std::vector<std::string>* warnings, const std::string& msg) {
    if (warnings) warnings->push_back(msg);
}

// Rows of x whose mask entry clears the threshold, stacked in order.
Tensor select_rows(const Tensor& x, const Tensor& mask) {
    std::vector<int> idx;
    for (int i = 0; i < mask.dim(0); ++i) {
        if (mask.data()[i] >= kMaskThreshold) idx.push_back(i);
    }
    Tensor sel = Tensor::zeros({static_cast<int>(idx.size()), x.dim(0)});
    for (std::size_t r = 0; r < idx.size(); ++r) sel.raw()[r * x.dim(0) + idx[r]] = 1.0;
    return op::matmul(sel, x);
}

Tensor blend_rows(const Tensor& base, const Tensor& styled, const Tensor& m) {
    Tensor inv = op::add_scalar(op::neg(m), 1.0);
    return op::add(op::mul_colvec(base, inv), op::mul_colvec(styled, m));
}

// pixel mask [H x W] lifted to [H x W x 3]
Tensor expand3(const Tensor& m) {
    const int n = m.dim(0) * m.dim(1);
    Tensor flat = op::mul_colvec(Tensor::full({n, 3}, 1.0), op::reshape(m, {n}));
    return op::reshape(flat, {m.dim(0), m.dim(1), 3});
}

}  // namespace

Tensor downsample_mask(const Tensor& mask, int patch) {
    if (mask.rank() != 2 || mask.dim(0) % patch != 0 || mask.dim(1) % patch != 0) {
        throw ShapeError("downsample_mask: " + shape_str(mask.shape()) + " not divisible by patch " +
                         std::to_string(patch));
    }
    return op::area_downsample(mask, patch);
}

std::pair<Tensor, Tensor> adapt_kv(const Tensor& k, const Tensor& v, const flow::KvPair& cache,
                                   const TokenMasks& masks, std::vector<std::string>* warnings) {
    if (k.dim(1) != cache.k.dim(1)) {
        throw ShapeError("adapt_kv: width " + shape_str(k.shape()) + " vs cache " + shape_str(cache.k.shape()));
    }
    if (!mask_nonempty(masks.m_style_tok)) {
        warn(warnings, "adapt_kv: empty style token mask, injection skipped");
        return {k, v};
    }
    Tensor k_tilde = op::adain(k, cache.k, masks.m_style_tok);
    Tensor v_tilde = op::adain(v, cache.v, masks.m_style_tok);
    return {blend_rows(k, k_tilde, masks.m_gen_tok), blend_rows(v, v_tilde, masks.m_gen_tok)};
}

Tensor injected_attention(const Tensor& q, const Tensor& k, const Tensor& v, const flow::KvPair& cache,
                          const TokenMasks& masks, int heads, std::vector<std::string>* warnings) {
    if (!mask_nonempty(masks.m_style_tok)) {
        warn(warnings, "injected_attention: empty style token mask, layer skipped");
        return op::mha(q, k, v, heads);
    }
    auto [kp, vp] = adapt_kv(k, v, cache, masks, warnings);
    Tensor f_base = op::mha(q, kp, vp, heads);

    Tensor ks = select_rows(cache.k, masks.m_style_tok);
    Tensor vs = select_rows(cache.v, masks.m_style_tok);
    Tensor f_style = op::mha(q, ks, vs, heads);

    Tensor adapted = op::adain(f_base, f_style, Tensor::full({f_style.dim(0)}, 1.0));
    return blend_rows(f_base, adapted, masks.m_gen_tok);
}

Tensor styled_sample(const Denoiser& dit, const StyleEncoder& enc, const ConditioningSet& cond,
                     const ConditioningSet& ref_cond, const Tensor& m_style_pix,
                     const flow::FlowSchedule& schedule, const InjectionConfig& cfg, Rng& rng,
                     std::vector<std::string>* warnings) {
    if (!m_style_pix.defined() || m_style_pix.shape() != cond.inpaint_mask.shape()) {
        throw ConfigError("styled_sample: reference text mask missing or mismatched");
    }
    NoGradGuard ng;
    const int gate = cfg.enabled ? cfg.gate_steps : 0;

    TokenMasks masks;
    masks.m_gen_tok = downsample_mask(cond.inpaint_mask, Denoiser::kPatch);
    masks.m_style_tok = downsample_mask(m_style_pix, Denoiser::kPatch);

    StyleEmbedding gen_style = enc.encode(cond.style_img);
    flow::InversionCache cache;
    if (gate > 0) {
        StyleEmbedding ref_style = enc.encode(ref_cond.style_img);
        auto ref_model = [&](const Tensor& xt, double t, int) {
            return dit.forward_velocity(xt, t, ref_cond, ref_style);
        };
        auto tracer = [&](const Tensor& xt, double t) {
            AttentionTrace trace;
            dit.forward_velocity(xt, t, ref_cond, ref_style, &trace);
            std::vector<flow::KvPair> layers;
            for (const auto& b : trace.blocks) layers.push_back({b.k, b.v});
            return layers;
        };
        cache = flow::invert(ref_model, tracer, ref_cond.concat_input, schedule, gate, masks.m_style_tok);
    }

    auto model = [&](const Tensor& xt, double t, int s) {
        if (s < gate && cache.steps_recorded > 0) {
            const auto& layers = cache.at_sampling_step(s);
            AttnOverride hook = [&](int block, const Tensor& q, const Tensor& k, const Tensor& v) {
                return injected_attention(q, k, v, layers[static_cast<std::size_t>(block)], masks, Denoiser::kHeads,
                                          warnings);
            };
            return dit.forward_velocity(xt, t, cond, gen_style, nullptr, &hook);
        }
        return dit.forward_velocity(xt, t, cond, gen_style);
    };

    return flow::euler_sample(model, cond.concat_input, expand3(cond.inpaint_mask), schedule, rng);
}

}  // namespace stgn::injection
