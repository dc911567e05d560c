#pragma once

// Inference-time style injection: token-grid masks, AdaIN adaptation of
// keys/values against an inverted reference cache, dual attention with
// mask-blended output, and the gated sampling driver.

#include <string>
#include <utility>
#include <vector>

#include "stgn/denoiser.hpp"
#include "stgn/flow.hpp"
#include "stgn/tensor.hpp"

namespace stgn::injection {

struct InjectionConfig {
    int gate_steps = 10;
    bool enabled = true;
    double mask_threshold = 0.5;
};

struct TokenMasks {
    Tensor m_gen_tok;    // over generation-canvas tokens
    Tensor m_style_tok;  // over reference tokens
};

// Area-average pooling of a pixel mask to the patch token grid.
Tensor downsample_mask(const Tensor& mask, int patch);

// K' = (1 - m_gen) . K + m_gen . adain(K; K_s over masked style tokens), and
// likewise for V. An empty style mask skips adaptation and records a warning.
std::pair<Tensor, Tensor> adapt_kv(const Tensor& k, const Tensor& v, const flow::KvPair& cache,
                                   const TokenMasks& masks, std::vector<std::string>* warnings = nullptr);

// Dual attention with mask-blended AdaIN output; replaces the pre-projection
// self-attention term of a denoiser block.
Tensor injected_attention(const Tensor& q, const Tensor& k, const Tensor& v, const flow::KvPair& cache,
                          const TokenMasks& masks, int heads, std::vector<std::string>* warnings = nullptr);

// Full pipeline: invert the reference canvas, then sample with injection
// hooks on the first gate_steps steps. m_style_pix is the reference text
// mask lifted onto the canvas (zero on the glyph half).
Tensor styled_sample(const Denoiser& dit, const StyleEncoder& enc, const ConditioningSet& cond,
                     const ConditioningSet& ref_cond, const Tensor& m_style_pix,
                     const flow::FlowSchedule& schedule, const InjectionConfig& cfg, Rng& rng,
                     std::vector<std::string>* warnings = nullptr);

}  // namespace stgn::injection
