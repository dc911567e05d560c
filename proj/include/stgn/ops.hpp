#pragma once

// Differentiable operations over Tensor. Shapes are explicit per op; no
// general broadcasting beyond scalar-tensor and the row/column vector
// helpers below.

#include <utility>
#include <vector>

#include "stgn/tensor.hpp"

namespace stgn::ops {

// Elementwise.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double s);
Tensor relu(const Tensor& a);
Tensor gelu(const Tensor& a);
Tensor recip(const Tensor& a);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);

// Row-wise softmax with max subtraction; input [n x c].
Tensor softmax_rows(const Tensor& a);

// Layer normalization over the last axis of [n x c] with learnable scale/shift.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Reductions to scalar.
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor mean_sq(const Tensor& a);

// Layout.
Tensor reshape(const Tensor& a, const Shape& shape);
Tensor slice_axis0(const Tensor& a, int r0, int r1);
Tensor concat_axis0(const std::vector<Tensor>& parts);
Tensor slice_cols(const Tensor& a, int c0, int c1);
Tensor concat_cols(const std::vector<Tensor>& parts);

// Broadcast helpers for [n x c] against vectors.
Tensor mul_rowvec(const Tensor& x, const Tensor& v);  // v: [c]
Tensor add_rowvec(const Tensor& x, const Tensor& v);  // v: [c]
Tensor mul_colvec(const Tensor& x, const Tensor& u);  // u: [n]

// 2-D strided convolution; x: [H x W x Cin], w: [Cout x kh x kw x Cin],
// b: [Cout] (pass an undefined Tensor for no bias).
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, int pad);

// Patch tokenization: [H x W x C] -> [(H/p * W/p) x (p*p*C)] and back.
Tensor patchify(const Tensor& x, int p);
Tensor unpatchify(const Tensor& tokens, int h, int w, int c, int p);

// Resampling. area_downsample maps a [H x W] map to one value per p x p
// patch (flattened token order); nearest_resize is index-gather resampling.
Tensor area_downsample(const Tensor& m, int p);
Tensor nearest_resize(const Tensor& x, int h2, int w2);

// Per-channel moments of x [n x c] over rows with mask >= 0.5; population
// variance, std clamped below at 1e-5. Throws EmptyRegionError if no row
// qualifies.
std::pair<Tensor, Tensor> masked_moments(const Tensor& x, const Tensor& mask);

// AdaIN: re-normalize x [n x c] so its per-channel moments match the masked
// moments of ref [m x c].
Tensor adain(const Tensor& x, const Tensor& ref, const Tensor& ref_mask);

// Gram matrix of features f [c x n]: (1/n) f f^T.
Tensor gram_matrix(const Tensor& f);

// Scaled dot-product attention, single head: q [nq x d], k,v [nk x d].
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v);

// Multi-head attention without output projection: splits the feature axis
// into `heads` slices, attends per slice, concatenates.
Tensor mha(const Tensor& q, const Tensor& k, const Tensor& v, int heads);

}  // namespace stgn::ops
