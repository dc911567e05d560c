#pragma once

// Evaluation metrics and the four-setting benchmark runner: threshold
// segmentation, nearest-template OCR decoding, Sen.Acc / NED, masked style
// distances over phi features, and report aggregation.

#include <functional>
#include <string>
#include <vector>

#include "stgn/rng.hpp"
#include "stgn/synthdata.hpp"
#include "stgn/tensor.hpp"

namespace stgn::eval {

// Foreground mask inside `region`: per-pixel mean-abs-channel distance to the
// background estimate (per-channel median of the region's outer border ring)
// thresholded at 0.15. Throws DomainError when the ring has < 4 pixels.
Tensor threshold_segment(const Tensor& img, const Tensor& region);

// Per-cell nearest-template decoding over all 20 glyphs at both stroke
// widths; ties resolve to the lowest glyph id. Returns glyph ids 0-19.
std::vector<int> ocr_decode(const Tensor& img, const Tensor& region, int x0, int y0, int k);

std::string glyphs_to_string(const std::vector<int>& glyphs20);
std::string truth_string(synth::Script script, const std::vector<int>& text);

struct AccNed {
    int acc = 0;     // 1 iff exact match
    double ned = 0;  // 1 - levenshtein / max length, higher is better
};
AccNed sen_acc_ned(const std::string& pred, const std::string& truth);

// Mask-weighted pooling of the layer-3 phi features, one vector per image.
// Throws DomainError when the downsampled mask has zero weight.
Tensor pooled_style_features(const Tensor& img, const Tensor& mask);

struct StyleDistance {
    double frechet = 0;    // batch-level, Gaussian moments with +1e-6 I
    double feat_dist = 0;  // sample-level mean L2 between paired features
};
StyleDistance masked_style_distance(const std::vector<Tensor>& gen, const std::vector<Tensor>& m_gen,
                                    const std::vector<Tensor>& ref, const std::vector<Tensor>& m_ref);

struct BenchSetting {
    synth::Mode mode = synth::Mode::Self;
    synth::Lang lang = synth::Lang::Mono;
    int n = 0;
    double sen_acc = 0;
    double ned = 0;
    double masked_frechet = 0;
    double masked_feat_dist = 0;
};

struct BenchReport {
    std::string config_hash;
    std::string checkpoint_id;
    std::uint64_t seed = 0;
    std::vector<BenchSetting> settings;  // self/external x mono/cross
};

// Produces the generated [64 x 32 x 3] canvas for one benchmark sample.
using Sampler = std::function<Tensor(const synth::SampleRecord&, Rng&)>;

BenchReport run_benchmark(const Sampler& sampler, const std::string& split_dir, std::uint64_t seed,
                          const std::string& config_hash, const std::string& checkpoint_id);

void write_report(const BenchReport& report, const std::string& path);
BenchReport read_report(const std::string& path);

}  // namespace stgn::eval
