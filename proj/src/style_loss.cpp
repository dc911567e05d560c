#include "stgn/style_loss.hpp"

#include <cmath>

#include "stgn/rng.hpp"

namespace stgn::style_loss {

namespace op = stgn::ops;

FeaturePyramid::FeaturePyramid() {
    NoGradGuard ng;
    Rng rng(0);
    const int chans[4] = {3, 8, 16, 32};
    for (int j = 0; j < 3; ++j) {
        const int ci = chans[j], co = chans[j + 1];
        const double sd = 1.0 / std::sqrt(9.0 * ci);
        weights_.push_back(Tensor::randn({co, 3, 3, ci}, rng, sd));
    }
}

const FeaturePyramid& FeaturePyramid::instance() {
    static FeaturePyramid phi;
    return phi;
}

std::vector<Tensor> FeaturePyramid::features(const Tensor& img) const {
    if (img.rank() != 3 || img.dim(2) != 3) throw ShapeError("feature_pyramid: " + shape_str(img.shape()));
    if (img.dim(0) < 8 || img.dim(1) < 8) {
        throw DomainError("feature_pyramid: image " + shape_str(img.shape()) + " too small for three stride-2 layers");
    }
    std::vector<Tensor> out;
    Tensor x = img;
    for (const Tensor& w : weights_) {
        x = op::relu(op::conv2d(x, w, Tensor(), 2, 1));
        const int h = x.dim(0), wd = x.dim(1), c = x.dim(2);
        out.push_back(op::transpose(op::reshape(x, {h * wd, c})));
    }
    return out;
}

std::vector<Tensor> feature_pyramid(const Tensor& img) { return FeaturePyramid::instance().features(img); }

namespace {

// mask [H x W] applied across all three channels of img [H x W x 3]
Tensor apply_mask(const Tensor& img, const Tensor& mask) {
    if (mask.rank() != 2 || mask.dim(0) != img.dim(0) || mask.dim(1) != img.dim(1)) {
        throw ShapeError("tsc_loss: mask " + shape_str(mask.shape()) + " vs image " + shape_str(img.shape()));
    }
    const int n = img.dim(0) * img.dim(1);
    Tensor flat = op::mul_colvec(op::reshape(img, {n, 3}), op::reshape(mask, {n}));
    return op::reshape(flat, img.shape());
}

}  // namespace

Tensor tsc_loss(const Tensor& gen, const Tensor& m_gen, const Tensor& ref, const Tensor& m_ref) {
    auto fg = feature_pyramid(apply_mask(gen, m_gen));
    auto fr = feature_pyramid(apply_mask(ref, m_ref));
    Tensor loss = Tensor::scalar(0.0);
    for (std::size_t j = 0; j < fg.size(); ++j) {
        Tensor d = op::sub(op::gram_matrix(fg[j]), op::gram_matrix(fr[j]));
        loss = op::add(loss, op::sum(op::mul(d, d)));
    }
    return loss;
}

LossReport total_loss(const Tensor& l_cfm, const Tensor& l_tsc, double lambda_tsc) {
    if (l_cfm.value() < 0.0 || l_tsc.value() < 0.0) {
        throw DomainError("total_loss: negative loss input");
    }
    LossReport r;
    r.l_cfm = l_cfm;
    r.l_tsc = l_tsc;
    r.lambda_tsc = lambda_tsc;
    r.total = op::add(l_cfm, op::scale(l_tsc, lambda_tsc));
    return r;
}

}  // namespace stgn::style_loss
