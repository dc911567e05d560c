#pragma once

// Procedural two-script styled-glyph scene generator: stroke tables, the
// rasterizer, style sampling, sample composition, and split/manifest I/O.

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "stgn/rng.hpp"
#include "stgn/tensor.hpp"

namespace stgn::synth {

enum class Script { A, B };  // latinlike (2-4 strokes) vs hanlike (5-8 strokes)
enum class Mode { Self, External };
enum class Lang { Mono, Cross };

constexpr int kScene = 32;
constexpr int kCell = 8;
constexpr int kGlyphsPerScript = 10;

struct Segment {
    double x1, y1, x2, y2;
};

using Rgb = std::array<double, 3>;

struct StyleSpec {
    Rgb fg{};
    int stroke_width = 1;  // 1 or 2
    bool has_gradient = false;
    int gradient_axis = 0;  // 0 = x, 1 = y
    Rgb fg2{};
    double texture_noise = 0.0;  // [0, 0.15]
    int bg_kind = 0;             // 0 solid, 1 gradient, 2 checker-clutter
    int bg_axis = 0;
    Rgb bg_a{}, bg_b{};
    int checker_period = 4;
};

// Foreground-defining fields only (external references redraw the background).
bool same_fg_style(const StyleSpec& a, const StyleSpec& b);
std::string style_to_string(const StyleSpec& s);
StyleSpec style_from_string(const std::string& s);

// Rejection-sampled so foreground and background segment cleanly: luminance
// gap >= 0.2, mean-abs-channel distance >= 0.35, background internal
// variation <= 0.1.
StyleSpec sample_style(Rng& rng);

const std::vector<Segment>& glyph_strokes(Script s, int index);

// Binary ink mask of one glyph in an 8x8 cell at the given stroke width.
Tensor glyph_template(Script s, int index, int width);
Tensor glyph_template(int glyph20, int width);  // 0-9 script A, 10-19 script B

// Binary ink mask of a whole line on the 32x32 scene; cells clip their glyph.
Tensor rasterize_text(const std::vector<int>& text, Script s, int width, int x0, int y0);

// Centered x for a line of n glyphs.
int line_x0(int n);

// Styled rendering: (image [32x32x3], exact foreground mask [32x32]).
std::pair<Tensor, Tensor> render_glyph_line(const std::vector<int>& text, Script script, const StyleSpec& style,
                                            int x0, int y0, Rng& rng);

Tensor concat_glyph_scene(const Tensor& glyph_map, const Tensor& scene);

// Bounding box of the text mask dilated by 2 px, placed on the scene half of
// the [64 x 32] canvas; the glyph half stays zero.
Tensor text_region_mask(const Tensor& text_mask);

struct SampleRecord {
    Tensor scene;         // [32 x 32 x 3]
    Tensor glyph_map;     // [32 x 32], ink 0 on white 1
    Tensor concat;        // [64 x 32 x 3]
    Tensor inpaint_mask;  // [64 x 32]
    Tensor text_mask;     // [32 x 32]
    StyleSpec style;
    std::vector<int> text;
    Script script = Script::A;
    Mode mode = Mode::Self;
    Lang lang = Lang::Mono;
    int x0 = 0, y0 = 0;
    Tensor style_ref;       // [32 x 32 x 3]
    Tensor style_ref_mask;  // [32 x 32]
    std::vector<int> ref_text;
    Script ref_script = Script::A;
    int ref_x0 = 0, ref_y0 = 0;
};

SampleRecord compose_sample(Rng& rng, Mode mode, Lang lang);

// Writes images plus a manifest `manifest.txt` into dir; bench splits cycle
// the {self, external} x {mono, cross} grid. Returns the manifest path.
std::string make_split(const std::string& dir, const std::string& kind, int n, std::uint64_t seed);

struct ManifestEntry {
    int id = 0;
    Mode mode = Mode::Self;
    Lang lang = Lang::Mono;
    Script script = Script::A;
    std::vector<int> text;
    int x0 = 0, y0 = 0;
    Script ref_script = Script::A;
    std::vector<int> ref_text;
    int ref_x0 = 0, ref_y0 = 0;
    std::string scene_path, glyph_path, mask_path, tmask_path, ref_path, refmask_path;
    StyleSpec style;
};

std::vector<ManifestEntry> read_manifest(const std::string& path);
SampleRecord load_sample(const ManifestEntry& e, const std::string& dir);

std::string text_to_string(const std::vector<int>& text);
std::vector<int> text_from_string(const std::string& s);

}  // namespace stgn::synth
