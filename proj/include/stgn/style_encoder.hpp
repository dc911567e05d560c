#pragma once

// Dual-branch style encoder: segmentation-pretrained text branch, generic
// visual branch, cross-attention fusion, and the projection to style
// key/value pairs.

#include <utility>

#include "stgn/nn.hpp"
#include "stgn/params.hpp"
#include "stgn/tensor.hpp"

namespace stgn {

struct StyleEmbedding {
    Tensor h_text;   // [n_q x d]
    Tensor h_vis;    // [n_q x d]
    Tensor z_style;  // [n_q x d]
    Tensor k_s;      // [n_q x d]
    Tensor v_s;      // [n_q x d]
};

class StyleEncoder {
public:
    static constexpr int kWidth = 64;
    static constexpr int kPatch = 4;
    static constexpr int kHeads = 4;
    static constexpr int kQueries = 8;
    static constexpr int kImage = 32;

    // Registers all parameters under "enc." in the store.
    StyleEncoder(ParamStore& ps, Rng& rng);
    // Rebinds to parameters already present (e.g. after checkpoint load).
    static StyleEncoder bind(ParamStore& ps);

    Tensor text_tokens(const Tensor& img) const;  // E_text output [tokens x d]
    Tensor encode_textual(const Tensor& img) const;
    Tensor encode_visual(const Tensor& img) const;
    Tensor fuse_styles(const Tensor& h_text, const Tensor& h_vis) const;
    std::pair<Tensor, Tensor> style_kv(const Tensor& z_style) const;
    StyleEmbedding encode(const Tensor& img) const;

    Tensor segmentation_pretrain_loss(const Tensor& img, const Tensor& text_mask) const;

    // Post-pretraining freeze of both backbones (E_text, E_vis).
    static void freeze_backbones(ParamStore& ps);

private:
    StyleEncoder() = default;

    struct Branch {
        nn::Linear embed;
        Tensor pos;
        nn::BlockParams b0, b1;
    };
    Branch text_, vis_;
    nn::BlockParams refine_;           // S_text
    Tensor q_text_, q_vis_;            // learned query tokens
    nn::BlockParams qtext_, qvis_;     // Q-former adaptors
    nn::Linear p_fc1_, p_fc2_;         // P_vis projector
    nn::AttnParams fuse_;              // Eq. (6) projections
    nn::Linear kv_k_, kv_v_;
    nn::Linear seg_fc1_, seg_out_;

    Tensor branch_tokens(const Tensor& img, const Branch& b) const;
};

}  // namespace stgn
