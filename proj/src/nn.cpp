#include "stgn/nn.hpp"

#include <cmath>

namespace stgn::nn {

namespace op = stgn::ops;

Tensor linear(const Tensor& x, const Linear& l) { return op::add_rowvec(op::matmul(x, l.w), l.b); }

Tensor attn_sublayer(const Tensor& x, const Tensor& kv_in, const BlockParams& p, int heads) {
    Tensor xq = op::layer_norm(x, p.ln1_g, p.ln1_b);
    Tensor q = linear(xq, p.attn.q);
    Tensor k = linear(kv_in, p.attn.k);
    Tensor v = linear(kv_in, p.attn.v);
    return op::add(x, linear(op::mha(q, k, v, heads), p.attn.out));
}

Tensor ff_sublayer(const Tensor& x, const BlockParams& p) {
    Tensor h = op::layer_norm(x, p.ln2_g, p.ln2_b);
    return op::add(x, linear(op::gelu(linear(h, p.ff1)), p.ff2));
}

Tensor transformer_block(const Tensor& x, const BlockParams& p, int heads) {
    Tensor xn = op::layer_norm(x, p.ln1_g, p.ln1_b);
    Tensor q = linear(xn, p.attn.q);
    Tensor k = linear(xn, p.attn.k);
    Tensor v = linear(xn, p.attn.v);
    Tensor h = op::add(x, linear(op::mha(q, k, v, heads), p.attn.out));
    return ff_sublayer(h, p);
}

Tensor cross_block(const Tensor& x, const Tensor& kv, const BlockParams& p, int heads) {
    return ff_sublayer(attn_sublayer(x, kv, p, heads), p);
}

Linear make_linear(ParamStore& ps, const std::string& prefix, int in, int out, Rng& rng, bool zero) {
    Linear l;
    const double sd = zero ? 0.0 : 1.0 / std::sqrt(static_cast<double>(in));
    l.w = ps.add(prefix + ".w", zero ? Tensor::zeros({in, out}) : Tensor::randn({in, out}, rng, sd));
    l.b = ps.add(prefix + ".b", Tensor::zeros({out}));
    return l;
}

BlockParams make_block(ParamStore& ps, const std::string& prefix, int width, int ff_mult, Rng& rng) {
    BlockParams p;
    p.ln1_g = ps.add(prefix + ".ln1.g", Tensor::full({width}, 1.0));
    p.ln1_b = ps.add(prefix + ".ln1.b", Tensor::zeros({width}));
    p.ln2_g = ps.add(prefix + ".ln2.g", Tensor::full({width}, 1.0));
    p.ln2_b = ps.add(prefix + ".ln2.b", Tensor::zeros({width}));
    p.attn.q = make_linear(ps, prefix + ".attn.q", width, width, rng);
    p.attn.k = make_linear(ps, prefix + ".attn.k", width, width, rng);
    p.attn.v = make_linear(ps, prefix + ".attn.v", width, width, rng);
    p.attn.out = make_linear(ps, prefix + ".attn.out", width, width, rng);
    p.ff1 = make_linear(ps, prefix + ".ff1", width, width * ff_mult, rng);
    p.ff2 = make_linear(ps, prefix + ".ff2", width * ff_mult, width, rng);
    return p;
}

Linear bind_linear(ParamStore& ps, const std::string& prefix) {
    return {ps.get(prefix + ".w"), ps.get(prefix + ".b")};
}

BlockParams bind_block(ParamStore& ps, const std::string& prefix) {
    BlockParams p;
    p.ln1_g = ps.get(prefix + ".ln1.g");
    p.ln1_b = ps.get(prefix + ".ln1.b");
    p.ln2_g = ps.get(prefix + ".ln2.g");
    p.ln2_b = ps.get(prefix + ".ln2.b");
    p.attn.q = bind_linear(ps, prefix + ".attn.q");
    p.attn.k = bind_linear(ps, prefix + ".attn.k");
    p.attn.v = bind_linear(ps, prefix + ".attn.v");
    p.attn.out = bind_linear(ps, prefix + ".attn.out");
    p.ff1 = bind_linear(ps, prefix + ".ff1");
    p.ff2 = bind_linear(ps, prefix + ".ff2");
    return p;
}

Tensor sinusoidal(double t, int dim) {
    Tensor e = Tensor::zeros({dim});
    const int half = dim / 2;
    // Geometric frequencies spanning about half a period up to 16 periods
    // over t in [0, 1]: smooth between neighboring sampling steps while the
    // top octaves still resolve them.
    constexpr double kTwoPi = 6.283185307179586;
    for (int i = 0; i < half; ++i) {
        const double freq = kTwoPi * 0.5 * std::pow(32.0, static_cast<double>(i) / (half - 1));
        e.raw()[i] = std::sin(t * freq);
        e.raw()[half + i] = std::cos(t * freq);
    }
    return e;
}

}  // namespace stgn::nn
