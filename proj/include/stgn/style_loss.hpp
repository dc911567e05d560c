#pragma once

// Fixed random feature pyramid phi, the masked Gram-matrix text style
// consistency loss, and the combined training objective.

#include <vector>

#include "stgn/ops.hpp"
#include "stgn/tensor.hpp"

namespace stgn::style_loss {

// Three frozen conv layers 3 -> 8 -> 16 -> 32, kernel 3, stride 2, relu,
// weights drawn once from seed 0 with zero biases.
class FeaturePyramid {
public:
    FeaturePyramid();

    // Per-layer features as [c_j x N_j] maps, ready for gram_matrix.
    std::vector<Tensor> features(const Tensor& img) const;

    static const FeaturePyramid& instance();

private:
    std::vector<Tensor> weights_;
};

std::vector<Tensor> feature_pyramid(const Tensor& img);

// Sum over layers of the squared Frobenius distance between Gram matrices of
// the pixel-masked images.
Tensor tsc_loss(const Tensor& gen, const Tensor& m_gen, const Tensor& ref, const Tensor& m_ref);

struct LossReport {
    Tensor l_cfm;
    Tensor l_tsc;
    double lambda_tsc = 10.0;
    Tensor total;
};

LossReport total_loss(const Tensor& l_cfm, const Tensor& l_tsc, double lambda_tsc = 10.0);

}  // namespace stgn::style_loss
