#pragma once

// Small shared building blocks for the encoder and the denoiser: linear
// layers, pre-LN attention blocks, and parameter initialization into a
// ParamStore.

#include <string>

#include "stgn/ops.hpp"
#include "stgn/params.hpp"
#include "stgn/rng.hpp"
#include "stgn/tensor.hpp"

namespace stgn::nn {

struct Linear {
    Tensor w;  // [in x out]
    Tensor b;  // [out]
};

Tensor linear(const Tensor& x, const Linear& l);

struct AttnParams {
    Linear q, k, v, out;
};

struct BlockParams {
    Tensor ln1_g, ln1_b, ln2_g, ln2_b;
    AttnParams attn;
    Linear ff1, ff2;
};

// Pre-LN residual attention; kv_in == x gives self-attention, otherwise the
// queries come from x and keys/values from kv_in (already normalized by the
// caller's convention: kv_in is normalized with ln1 too when self).
Tensor attn_sublayer(const Tensor& x, const Tensor& kv_in, const BlockParams& p, int heads);
Tensor ff_sublayer(const Tensor& x, const BlockParams& p);
Tensor transformer_block(const Tensor& x, const BlockParams& p, int heads);
Tensor cross_block(const Tensor& x, const Tensor& kv, const BlockParams& p, int heads);

// Registration: creates parameters under `prefix.` in the store and returns
// handles bound to the stored tensors.
Linear make_linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng, bool zero = false);
BlockParams make_block(ParamStore& ps, const std::string& prefix, int width, int ff_mult, Rng& rng);

// Rebinds handles to tensors already present in the store (after checkpoint
// load the store owns fresh tensors).
Linear bind_linear(ParamStore& ps, const std::string& prefix);
BlockParams bind_block(ParamStore& ps, const std::string& prefix);

// Sinusoidal embedding of a scalar into `dim` features (half sin, half cos).
Tensor sinusoidal(double t, int dim);

}  // namespace stgn::nn
