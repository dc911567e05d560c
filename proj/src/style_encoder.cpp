#include "stgn/style_encoder.hpp"

#include <cmath>

namespace stgn {

namespace op = stgn::ops;
using nn::linear;

namespace {

constexpr int kTokens = (StyleEncoder::kImage / StyleEncoder::kPatch) * (StyleEncoder::kImage / StyleEncoder::kPatch);
constexpr int kPatchDim = StyleEncoder::kPatch * StyleEncoder::kPatch * 3;

void check_finite(const Tensor& t, const char* what) {
    for (double v : t.data()) {
        if (!std::isfinite(v)) throw NumericError(std::string("style_encoder: non-finite ") + what);
    }
}

// Learned queries cross-attend to the token sequence; no query residual so a
// zeroed output projection nulls the adaptor, then a residual MLP.
Tensor qformer(const Tensor& queries, const Tensor& tokens, const nn::BlockParams& p, int heads) {
    Tensor q = linear(queries, p.attn.q);
    Tensor k = linear(tokens, p.attn.k);
    Tensor v = linear(tokens, p.attn.v);
    Tensor h = linear(op::mha(q, k, v, heads), p.attn.out);
    return nn::ff_sublayer(h, p);
}

// Contiguous grouped averaging of [n x d] rows down to n_q rows.
Tensor group_pool(const Tensor& x, int n_q) {
    const int n = x.dim(0);
    Tensor pool = Tensor::zeros({n_q, n});
    const int g = n / n_q;
    for (int i = 0; i < n_q; ++i) {
        for (int j = 0; j < g; ++j) pool.raw()[i * n + i * g + j] = 1.0 / g;
    }
    return op::matmul(pool, x);
}

}  // namespace

StyleEncoder::StyleEncoder(ParamStore& ps, Rng& rng) {
    auto make_branch = [&](const std::string& pre) {
        Branch b;
        b.embed = nn::make_linear(ps, pre + ".embed", kPatchDim, kWidth, rng);
        b.pos = ps.add(pre + ".pos", Tensor::randn({kTokens, kWidth}, rng, 0.02));
        b.b0 = nn::make_block(ps, pre + ".b0", kWidth, 2, rng);
        b.b1 = nn::make_block(ps, pre + ".b1", kWidth, 2, rng);
        return b;
    };
    text_ = make_branch("enc.text.e");
    vis_ = make_branch("enc.vis.e");
    refine_ = nn::make_block(ps, "enc.text.refine", kWidth, 2, rng);
    q_text_ = ps.add("enc.text.q.query", Tensor::randn({kQueries, kWidth}, rng, 0.02));
    q_vis_ = ps.add("enc.vis.q.query", Tensor::randn({kQueries, kWidth}, rng, 0.02));
    qtext_ = nn::make_block(ps, "enc.text.q.blk", kWidth, 2, rng);
    qvis_ = nn::make_block(ps, "enc.vis.q.blk", kWidth, 2, rng);
    p_fc1_ = nn::make_linear(ps, "enc.vis.p.fc1", kWidth, kWidth * 2, rng);
    p_fc2_ = nn::make_linear(ps, "enc.vis.p.fc2", kWidth * 2, kWidth, rng);
    fuse_.q = nn::make_linear(ps, "enc.fuse.q", kWidth, kWidth, rng);
    fuse_.k = nn::make_linear(ps, "enc.fuse.k", kWidth, kWidth, rng);
    fuse_.v = nn::make_linear(ps, "enc.fuse.v", kWidth, kWidth, rng);
    fuse_.out = nn::make_linear(ps, "enc.fuse.out", kWidth, kWidth, rng);
    kv_k_ = nn::make_linear(ps, "enc.kv.k", kWidth, kWidth, rng);
    kv_v_ = nn::make_linear(ps, "enc.kv.v", kWidth, kWidth, rng);
    seg_fc1_ = nn::make_linear(ps, "enc.seg.fc1", kWidth, kWidth * 2, rng);
    seg_out_ = nn::make_linear(ps, "enc.seg.out", kWidth * 2, kPatchDim, rng);

    // Structured color channel: V_s dims 0..2 start as the style image's
    // horizontal-band mean colors (one band per pooled visual token). The
    // style branch's output gate starts at zero, so whatever reaches V_s at
    // initialization determines how quickly that gate can open: clean band
    // statistics (bands with text differ from pure-background bands exactly
    // by foreground coverage) give the downstream gradient an immediately
    // useful signal, where random features would have to co-adapt first.
    auto zero_col = [](Tensor& w, int out, int c) {
        for (int r = 0; r < w.dim(0); ++r) w.raw()[r * out + c] = 0.0;
    };
    for (int c = 0; c < 3; ++c) {
        // Visual tokens: dim c = mean image color of the token's patch. The
        // backbone is frozen, so zeroing every projection that writes into
        // dims 0..2 keeps the channel exact through both residual blocks.
        zero_col(vis_.embed.w, kWidth, c);
        for (int j = 0; j < kPatch * kPatch; ++j) {
            vis_.embed.w.raw()[(j * 3 + c) * kWidth + c] = 1.0 / (kPatch * kPatch);
        }
        zero_col(vis_.pos, kWidth, c);
        for (nn::BlockParams* blk : {&vis_.b0, &vis_.b1, &qvis_}) {
            zero_col(blk->attn.out.w, kWidth, c);
            zero_col(blk->ff2.w, kWidth, c);
        }
        // The pooling MLP passes the channel exactly: gelu(x) − gelu(−x) = x.
        zero_col(p_fc1_.w, kWidth * 2, 2 * c);
        zero_col(p_fc1_.w, kWidth * 2, 2 * c + 1);
        p_fc1_.w.raw()[c * (kWidth * 2) + 2 * c] = 1.0;
        p_fc1_.w.raw()[c * (kWidth * 2) + 2 * c + 1] = -1.0;
        zero_col(p_fc2_.w, kWidth, c);
        p_fc2_.w.raw()[(2 * c) * kWidth + c] = 1.0;
        p_fc2_.w.raw()[(2 * c + 1) * kWidth + c] = -1.0;
        // Fusion values and the V projection carry the dims through; the
        // fusion attention only reweights bands (queries come from the text
        // branch, which learns which bands matter).
        zero_col(fuse_.v.w, kWidth, c);
        fuse_.v.w.raw()[c * kWidth + c] = 1.0;
        zero_col(fuse_.out.w, kWidth, c);
        fuse_.out.w.raw()[c * kWidth + c] = 1.0;
        zero_col(kv_v_.w, kWidth, c);
        kv_v_.w.raw()[c * kWidth + c] = 1.0;
    }
}

StyleEncoder StyleEncoder::bind(ParamStore& ps) {
    StyleEncoder e;
    auto bind_branch = [&](const std::string& pre) {
        Branch b;
        b.embed = nn::bind_linear(ps, pre + ".embed");
        b.pos = ps.get(pre + ".pos");
        b.b0 = nn::bind_block(ps, pre + ".b0");
        b.b1 = nn::bind_block(ps, pre + ".b1");
        return b;
    };
    e.text_ = bind_branch("enc.text.e");
    e.vis_ = bind_branch("enc.vis.e");
    e.refine_ = nn::bind_block(ps, "enc.text.refine");
    e.q_text_ = ps.get("enc.text.q.query");
    e.q_vis_ = ps.get("enc.vis.q.query");
    e.qtext_ = nn::bind_block(ps, "enc.text.q.blk");
    e.qvis_ = nn::bind_block(ps, "enc.vis.q.blk");
    e.p_fc1_ = nn::bind_linear(ps, "enc.vis.p.fc1");
    e.p_fc2_ = nn::bind_linear(ps, "enc.vis.p.fc2");
    e.fuse_.q = nn::bind_linear(ps, "enc.fuse.q");
    e.fuse_.k = nn::bind_linear(ps, "enc.fuse.k");
    e.fuse_.v = nn::bind_linear(ps, "enc.fuse.v");
    e.fuse_.out = nn::bind_linear(ps, "enc.fuse.out");
    e.kv_k_ = nn::bind_linear(ps, "enc.kv.k");
    e.kv_v_ = nn::bind_linear(ps, "enc.kv.v");
    e.seg_fc1_ = nn::bind_linear(ps, "enc.seg.fc1");
    e.seg_out_ = nn::bind_linear(ps, "enc.seg.out");
    return e;
}

Tensor StyleEncoder::branch_tokens(const Tensor& img, const Branch& b) const {
    if (img.rank() != 3 || img.dim(0) != kImage || img.dim(1) != kImage || img.dim(2) != 3) {
        throw ShapeError("style_encoder: image " + shape_str(img.shape()));
    }
    Tensor tok = op::add(linear(op::patchify(img, kPatch), b.embed), b.pos);
    tok = nn::transformer_block(tok, b.b0, kHeads);
    return nn::transformer_block(tok, b.b1, kHeads);
}

Tensor StyleEncoder::text_tokens(const Tensor& img) const { return branch_tokens(img, text_); }

Tensor StyleEncoder::encode_textual(const Tensor& img) const {
    Tensor tok = nn::transformer_block(text_tokens(img), refine_, kHeads);
    Tensor h = qformer(q_text_, tok, qtext_, kHeads);
    check_finite(h, "h_text");
    return h;
}

Tensor StyleEncoder::encode_visual(const Tensor& img) const {
    Tensor tok = branch_tokens(img, vis_);
    Tensor p_path = group_pool(linear(op::gelu(linear(tok, p_fc1_)), p_fc2_), kQueries);
    Tensor q_path = qformer(q_vis_, tok, qvis_, kHeads);
    Tensor h = op::add(p_path, q_path);
    check_finite(h, "h_vis");
    return h;
}

Tensor StyleEncoder::fuse_styles(const Tensor& h_text, const Tensor& h_vis) const {
    if (h_text.dim(1) != h_vis.dim(1)) {
        throw ShapeError("fuse_styles: " + shape_str(h_text.shape()) + " vs " + shape_str(h_vis.shape()));
    }
    Tensor q = linear(h_text, fuse_.q);
    Tensor k = linear(h_vis, fuse_.k);
    Tensor v = linear(h_vis, fuse_.v);
    return linear(op::mha(q, k, v, kHeads), fuse_.out);
}

std::pair<Tensor, Tensor> StyleEncoder::style_kv(const Tensor& z_style) const {
    return {linear(z_style, kv_k_), linear(z_style, kv_v_)};
}

StyleEmbedding StyleEncoder::encode(const Tensor& img) const {
    StyleEmbedding e;
    e.h_text = encode_textual(img);
    e.h_vis = encode_visual(img);
    e.z_style = fuse_styles(e.h_text, e.h_vis);
    auto kv = style_kv(e.z_style);
    e.k_s = kv.first;
    e.v_s = kv.second;
    check_finite(e.k_s, "K_s");
    check_finite(e.v_s, "V_s");
    return e;
}

Tensor StyleEncoder::segmentation_pretrain_loss(const Tensor& img, const Tensor& text_mask) const {
    if (text_mask.rank() != 2 || text_mask.dim(0) != img.dim(0) || text_mask.dim(1) != img.dim(1)) {
        throw ShapeError("segmentation_pretrain_loss: mask " + shape_str(text_mask.shape()) + " vs image " +
                         shape_str(img.shape()));
    }
    Tensor tok = text_tokens(img);
    Tensor pred = op::unpatchify(linear(op::gelu(linear(tok, seg_fc1_)), seg_out_), kImage, kImage, 3, kPatch);

    const int n = kImage * kImage;
    Tensor m = op::reshape(text_mask, {n});
    Tensor fg = op::mul_colvec(op::reshape(img, {n, 3}), m);
    Tensor bg = op::mul_colvec(Tensor::full({n, 3}, 0.5), op::add_scalar(op::neg(m), 1.0));
    Tensor target = op::reshape(op::add(fg, bg), {kImage, kImage, 3});

    return op::mean_sq(op::sub(pred, target));
}

void StyleEncoder::freeze_backbones(ParamStore& ps) {
    ps.freeze_prefix("enc.text.e.");
    ps.freeze_prefix("enc.vis.e.");
}

}  // namespace stgn
