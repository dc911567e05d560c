#pragma once

// Tiny diffusion-transformer velocity predictor over the glyph+scene canvas,
// with an additive style-attention branch in every block and an attention
// trace / override surface for inference-time injection.

#include <functional>
#include <string>
#include <vector>

#include "stgn/nn.hpp"
#include "stgn/params.hpp"
#include "stgn/style_encoder.hpp"
#include "stgn/tensor.hpp"

namespace stgn {

struct ConditioningSet {
    Tensor concat_input;  // [2H x W x 3] glyph atop scene
    Tensor inpaint_mask;  // [2H x W], 1 = generate
    std::string target_text;
    Tensor style_img;  // [H x W x 3]
};

struct AttentionTrace {
    struct BlockTrace {
        Tensor q, k, v, out;
    };
    std::vector<BlockTrace> blocks;
};

// Replaces the pre-projection self-attention of one block during sampling.
using AttnOverride = std::function<Tensor(int block, const Tensor& q, const Tensor& k, const Tensor& v)>;

class Denoiser {
public:
    static constexpr int kWidth = 64;
    static constexpr int kPatch = 4;
    static constexpr int kHeads = 4;

    Denoiser(ParamStore& ps, Rng& rng, int depth = 4, int canvas_h = 64, int canvas_w = 32);
    static Denoiser bind(ParamStore& ps, int depth = 4, int canvas_h = 64, int canvas_w = 32);

    int depth() const { return depth_; }
    int canvas_h() const { return canvas_h_; }
    int canvas_w() const { return canvas_w_; }
    int tokens() const { return (canvas_h_ / kPatch) * (canvas_w_ / kPatch); }

    Tensor forward_velocity(const Tensor& xt, double t, const ConditioningSet& cond, const StyleEmbedding& style,
                            AttentionTrace* trace = nullptr, const AttnOverride* override_fn = nullptr) const;

    // Self-attention as computed inside each block when no override is
    // installed: standard multi-head attention except that the first head's
    // logits carry a fixed structural bias pairing each glyph-half token with
    // the scene-half token at the same cell (and vice versa), so the
    // cross-half correspondence does not have to be discovered by training.
    Tensor self_attention(const Tensor& q, const Tensor& k, const Tensor& v) const;

private:
    Denoiser() = default;

    int depth_ = 0, canvas_h_ = 0, canvas_w_ = 0;
    nn::Linear embed_;
    Tensor pos_;
    Tensor route_bias_;  // [tokens x tokens] constant, not a parameter
    Tensor ctx_bias_;    // [tokens x tokens] constant, not a parameter
    nn::Linear time_fc1_, time_fc2_;
    struct Block {
        nn::BlockParams core;
        nn::Linear style_out;  // zero-initialized
    };
    std::vector<Block> blocks_;
    Tensor final_g_, final_b_;
    nn::Linear head_;
};

}  // namespace stgn
