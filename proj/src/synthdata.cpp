#include "stgn/synthdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stgn/error.hpp"
#include "stgn/pnm.hpp"

namespace stgn::synth {

namespace {

using Strokes = std::vector<Segment>;

// Stroke coordinates sit on pixel centers (half-integers) of the 8x8 cell so
// a width-1 stroke covers exactly one pixel column/row.
const std::vector<Strokes>& script_a() {
    static const std::vector<Strokes> g = {
        {{1.5, 0.5, 1.5, 6.5}, {1.5, 6.5, 6.5, 6.5}},                                           // L
        {{0.5, 0.5, 6.5, 0.5}, {3.5, 0.5, 3.5, 6.5}},                                           // T
        {{0.5, 0.5, 6.5, 6.5}, {6.5, 0.5, 0.5, 6.5}},                                           // X
        {{0.5, 0.5, 3.5, 6.5}, {6.5, 0.5, 3.5, 6.5}},                                           // V
        {{1.5, 6.5, 1.5, 0.5}, {1.5, 0.5, 5.5, 6.5}, {5.5, 6.5, 5.5, 0.5}},                     // N
        {{0.5, 0.5, 6.5, 0.5}, {6.5, 0.5, 0.5, 6.5}, {0.5, 6.5, 6.5, 6.5}},                     // Z
        {{0.5, 0.5, 0.5, 6.5}, {6.5, 0.5, 6.5, 6.5}, {0.5, 3.5, 6.5, 3.5}},                     // H
        {{1.5, 0.5, 1.5, 6.5}, {5.5, 0.5, 1.5, 3.5}, {1.5, 3.5, 5.5, 6.5}},                     // K
        {{0.5, 0.5, 1.5, 6.5}, {1.5, 6.5, 3.5, 2.5}, {3.5, 2.5, 5.5, 6.5}, {5.5, 6.5, 6.5, 0.5}},  // W
        {{0.5, 6.5, 3.5, 0.5}, {3.5, 0.5, 6.5, 6.5}, {1.5, 4.5, 5.5, 4.5}},                     // A
    };
    return g;
}

const std::vector<Strokes>& script_b() {
    static const std::vector<Strokes> g = {
        {{0.5, 0.5, 6.5, 0.5}, {6.5, 0.5, 6.5, 6.5}, {6.5, 6.5, 0.5, 6.5}, {0.5, 6.5, 0.5, 0.5},
         {3.5, 3.5, 3.5, 3.5}},
        {{0.5, 0.5, 6.5, 0.5}, {6.5, 0.5, 6.5, 6.5}, {6.5, 6.5, 0.5, 6.5}, {0.5, 6.5, 0.5, 0.5},
         {0.5, 3.5, 6.5, 3.5}},
        {{1.5, 0.5, 5.5, 0.5}, {1.5, 6.5, 5.5, 6.5}, {3.5, 0.5, 3.5, 6.5}, {0.5, 3.5, 1.5, 3.5},
         {5.5, 3.5, 6.5, 3.5}},
        {{1.5, 0.5, 1.5, 6.5}, {3.5, 0.5, 3.5, 6.5}, {0.5, 1.5, 6.5, 1.5}, {0.5, 3.5, 6.5, 3.5},
         {0.5, 5.5, 6.5, 5.5}},
        {{2.5, 0.5, 2.5, 6.5}, {4.5, 0.5, 4.5, 6.5}, {0.5, 2.5, 6.5, 2.5}, {0.5, 4.5, 6.5, 4.5},
         {0.5, 6.5, 1.5, 5.5}},
        {{1.5, 2.5, 1.5, 6.5}, {3.5, 0.5, 3.5, 6.5}, {5.5, 2.5, 5.5, 6.5}, {1.5, 6.5, 5.5, 6.5},
         {0.5, 1.5, 1.5, 2.5}},
        {{2.5, 0.5, 2.5, 6.5}, {4.5, 0.5, 4.5, 6.5}, {0.5, 1.5, 2.5, 1.5}, {0.5, 3.5, 2.5, 3.5},
         {0.5, 5.5, 2.5, 5.5}, {4.5, 2.5, 6.5, 2.5}},
        {{1.5, 0.5, 1.5, 6.5}, {5.5, 0.5, 5.5, 6.5}, {1.5, 1.5, 5.5, 1.5}, {1.5, 3.5, 5.5, 3.5},
         {1.5, 5.5, 5.5, 5.5}, {5.5, 0.5, 6.5, 1.5}, {6.5, 4.5, 6.5, 5.5}},
        {{0.5, 0.5, 6.5, 6.5}, {6.5, 0.5, 0.5, 6.5}, {3.5, 0.5, 3.5, 6.5}, {0.5, 3.5, 6.5, 3.5},
         {1.5, 0.5, 5.5, 0.5}, {1.5, 6.5, 5.5, 6.5}, {0.5, 2.5, 0.5, 4.5}},
        {{1.5, 1.5, 5.5, 1.5}, {1.5, 3.5, 5.5, 3.5}, {1.5, 5.5, 5.5, 5.5}, {3.5, 0.5, 3.5, 6.5},
         {0.5, 2.5, 0.5, 4.5}},
    };
    return g;
}

double seg_dist(double px, double py, const Segment& s) {
    const double dx = s.x2 - s.x1, dy = s.y2 - s.y1;
    const double len2 = dx * dx + dy * dy;
    double t = len2 > 0.0 ? ((px - s.x1) * dx + (py - s.y1) * dy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    const double qx = s.x1 + t * dx, qy = s.y1 + t * dy;
    return std::hypot(px - qx, py - qy);
}

bool cell_ink(const Strokes& strokes, int px, int py, int width) {
    const double cx = px + 0.5, cy = py + 0.5;
    const double r = width / 2.0;
    for (const auto& s : strokes) {
        if (seg_dist(cx, cy, s) <= r) return true;
    }
    return false;
}

double lum(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

double chan_dist(const Rgb& a, const Rgb& b) {
    return (std::fabs(a[0] - b[0]) + std::fabs(a[1] - b[1]) + std::fabs(a[2] - b[2])) / 3.0;
}

bool bg_ok(const StyleSpec& s, const Rgb& bg) {
    if (std::fabs(lum(s.fg) - lum(bg)) < 0.2 || chan_dist(s.fg, bg) < 0.35) return false;
    if (s.has_gradient) {
        if (std::fabs(lum(s.fg2) - lum(bg)) < 0.2 || chan_dist(s.fg2, bg) < 0.35) return false;
    }
    return true;
}

Rgb rand_rgb(Rng& rng) { return {rng.uniform(), rng.uniform(), rng.uniform()}; }

void sample_bg_into(StyleSpec& s, Rng& rng) {
    for (int attempt = 0; attempt < 10000; ++attempt) {
        s.bg_kind = static_cast<int>(rng.next_u64() % 3);
        s.bg_axis = static_cast<int>(rng.next_u64() % 2);
        s.checker_period = 2 + static_cast<int>(rng.next_u64() % 3);
        s.bg_a = rand_rgb(rng);
        for (int c = 0; c < 3; ++c) {
            s.bg_b[c] = std::clamp(s.bg_a[c] + (rng.uniform() * 2.0 - 1.0) * 0.1, 0.0, 1.0);
        }
        if (bg_ok(s, s.bg_a) && bg_ok(s, s.bg_b)) return;
    }
    throw NumericError("sample_style: background rejection did not converge");
}

Rgb bg_color_at(const StyleSpec& s, int x, int y) {
    switch (s.bg_kind) {
        case 0:
            return s.bg_a;
        case 1: {
            const double u = (s.bg_axis == 0 ? x : y) / (kScene - 1.0);
            Rgb c;
            for (int i = 0; i < 3; ++i) c[i] = s.bg_a[i] + u * (s.bg_b[i] - s.bg_a[i]);
            return c;
        }
        default: {
            const int p = s.checker_period;
            return ((x / p + y / p) % 2 == 0) ? s.bg_a : s.bg_b;
        }
    }
}

std::string mode_str(Mode m) { return m == Mode::Self ? "self" : "external"; }
std::string lang_str(Lang l) { return l == Lang::Mono ? "mono" : "cross"; }
std::string script_str(Script s) { return s == Script::A ? "A" : "B"; }

Mode mode_parse(const std::string& s) {
    if (s == "self") return Mode::Self;
    if (s == "external") return Mode::External;
    throw IoError("manifest: bad mode " + s);
}
Lang lang_parse(const std::string& s) {
    if (s == "mono") return Lang::Mono;
    if (s == "cross") return Lang::Cross;
    throw IoError("manifest: bad lang " + s);
}
Script script_parse(const std::string& s) {
    if (s == "A") return Script::A;
    if (s == "B") return Script::B;
    throw IoError("manifest: bad script " + s);
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

bool same_fg_style(const StyleSpec& a, const StyleSpec& b) {
    return a.fg == b.fg && a.stroke_width == b.stroke_width && a.has_gradient == b.has_gradient &&
           a.gradient_axis == b.gradient_axis && a.fg2 == b.fg2 && a.texture_noise == b.texture_noise;
}

std::string style_to_string(const StyleSpec& s) {
    std::ostringstream o;
    o << fmt_double(s.fg[0]) << ',' << fmt_double(s.fg[1]) << ',' << fmt_double(s.fg[2]) << ',' << s.stroke_width
      << ',' << (s.has_gradient ? 1 : 0) << ',' << s.gradient_axis << ',' << fmt_double(s.fg2[0]) << ','
      << fmt_double(s.fg2[1]) << ',' << fmt_double(s.fg2[2]) << ',' << fmt_double(s.texture_noise) << ','
      << s.bg_kind << ',' << s.bg_axis << ',' << fmt_double(s.bg_a[0]) << ',' << fmt_double(s.bg_a[1]) << ','
      << fmt_double(s.bg_a[2]) << ',' << fmt_double(s.bg_b[0]) << ',' << fmt_double(s.bg_b[1]) << ','
      << fmt_double(s.bg_b[2]) << ',' << s.checker_period;
    return o.str();
}

StyleSpec style_from_string(const std::string& str) {
    std::vector<std::string> parts;
    std::stringstream ss(str);
    std::string tok;
    while (std::getline(ss, tok, ',')) parts.push_back(tok);
    if (parts.size() != 19) throw IoError("style_from_string: expected 19 fields, got " + std::to_string(parts.size()));
    StyleSpec s;
    s.fg = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2])};
    s.stroke_width = std::stoi(parts[3]);
    s.has_gradient = parts[4] == "1";
    s.gradient_axis = std::stoi(parts[5]);
    s.fg2 = {std::stod(parts[6]), std::stod(parts[7]), std::stod(parts[8])};
    s.texture_noise = std::stod(parts[9]);
    s.bg_kind = std::stoi(parts[10]);
    s.bg_axis = std::stoi(parts[11]);
    s.bg_a = {std::stod(parts[12]), std::stod(parts[13]), std::stod(parts[14])};
    s.bg_b = {std::stod(parts[15]), std::stod(parts[16]), std::stod(parts[17])};
    s.checker_period = std::stoi(parts[18]);
    return s;
}

StyleSpec sample_style(Rng& rng) {
    StyleSpec s;
    s.fg = rand_rgb(rng);
    s.stroke_width = 1 + static_cast<int>(rng.next_u64() % 2);
    s.has_gradient = rng.uniform() < 0.4;
    s.gradient_axis = static_cast<int>(rng.next_u64() % 2);
    s.fg2 = s.fg;
    if (s.has_gradient) {
        for (int c = 0; c < 3; ++c) s.fg2[c] = std::clamp(s.fg[c] + (rng.uniform() * 2.0 - 1.0) * 0.15, 0.0, 1.0);
    }
    s.texture_noise = rng.uniform() * 0.1;
    sample_bg_into(s, rng);
    return s;
}

const std::vector<Segment>& glyph_strokes(Script s, int index) {
    if (index < 0 || index >= kGlyphsPerScript) throw DomainError("glyph_strokes: index " + std::to_string(index));
    return s == Script::A ? script_a()[index] : script_b()[index];
}

Tensor glyph_template(Script s, int index, int width) {
    const Strokes& strokes = glyph_strokes(s, index);
    Tensor t = Tensor::zeros({kCell, kCell});
    for (int y = 0; y < kCell; ++y) {
        for (int x = 0; x < kCell; ++x) {
            if (cell_ink(strokes, x, y, width)) t.raw()[y * kCell + x] = 1.0;
        }
    }
    return t;
}

Tensor glyph_template(int glyph20, int width) {
    if (glyph20 < 0 || glyph20 >= 2 * kGlyphsPerScript) {
        throw DomainError("glyph_template: id " + std::to_string(glyph20));
    }
    return glyph_template(glyph20 < kGlyphsPerScript ? Script::A : Script::B, glyph20 % kGlyphsPerScript, width);
}

int line_x0(int n) { return (kScene - kCell * n) / 2; }

Tensor rasterize_text(const std::vector<int>& text, Script s, int width, int x0, int y0) {
    const int k = static_cast<int>(text.size());
    if (k < 2 || k > 4) throw DomainError("rasterize_text: line length " + std::to_string(k));
    if (x0 < 0 || y0 < 0 || x0 + k * kCell > kScene || y0 + kCell > kScene) {
        throw DomainError("rasterize_text: text does not fit at (" + std::to_string(x0) + ", " +
                          std::to_string(y0) + ")");
    }
    Tensor m = Tensor::zeros({kScene, kScene});
    for (int i = 0; i < k; ++i) {
        Tensor cell = glyph_template(s, text[static_cast<std::size_t>(i)], width);
        for (int y = 0; y < kCell; ++y) {
            for (int x = 0; x < kCell; ++x) {
                if (cell.data()[y * kCell + x] > 0.5) m.raw()[(y0 + y) * kScene + x0 + i * kCell + x] = 1.0;
            }
        }
    }
    return m;
}

std::pair<Tensor, Tensor> render_glyph_line(const std::vector<int>& text, Script script, const StyleSpec& style,
                                            int x0, int y0, Rng& rng) {
    Tensor mask = rasterize_text(text, script, style.stroke_width, x0, y0);
    Tensor img = Tensor::zeros({kScene, kScene, 3});
    const int k = static_cast<int>(text.size());
    for (int y = 0; y < kScene; ++y) {
        for (int x = 0; x < kScene; ++x) {
            Rgb c;
            if (mask.data()[y * kScene + x] > 0.5) {
                c = style.fg;
                if (style.has_gradient) {
                    const double u = style.gradient_axis == 0
                                         ? (x - x0) / (k * kCell - 1.0)
                                         : (y - y0) / (kCell - 1.0);
                    const double uc = std::clamp(u, 0.0, 1.0);
                    for (int i = 0; i < 3; ++i) c[i] = style.fg[i] + uc * (style.fg2[i] - style.fg[i]);
                }
                if (style.texture_noise > 0.0) {
                    for (int i = 0; i < 3; ++i) {
                        c[i] = std::clamp(c[i] + style.texture_noise * (rng.uniform() * 2.0 - 1.0), 0.0, 1.0);
                    }
                }
            } else {
                c = bg_color_at(style, x, y);
            }
            for (int i = 0; i < 3; ++i) img.raw()[(y * kScene + x) * 3 + i] = c[i];
        }
    }
    return {img, mask};
}

Tensor concat_glyph_scene(const Tensor& glyph_map, const Tensor& scene) {
    if (glyph_map.rank() != 2 || scene.rank() != 3 || glyph_map.dim(1) != scene.dim(1)) {
        throw ShapeError("concat_glyph_scene: " + shape_str(glyph_map.shape()) + " vs " + shape_str(scene.shape()));
    }
    const int h = glyph_map.dim(0), w = glyph_map.dim(1);
    Tensor out = Tensor::zeros({h + scene.dim(0), w, 3});
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            for (int c = 0; c < 3; ++c) out.raw()[(y * w + x) * 3 + c] = glyph_map.data()[y * w + x];
        }
    }
    std::copy(scene.data().begin(), scene.data().end(), out.raw().begin() + static_cast<long>(h) * w * 3);
    return out;
}

Tensor text_region_mask(const Tensor& text_mask) {
    int xmin = kScene, xmax = -1, ymin = kScene, ymax = -1;
    for (int y = 0; y < kScene; ++y) {
        for (int x = 0; x < kScene; ++x) {
            if (text_mask.data()[y * kScene + x] > 0.5) {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    }
    Tensor m = Tensor::zeros({2 * kScene, kScene});
    if (xmax < 0) return m;
    xmin = std::max(0, xmin - 2);
    ymin = std::max(0, ymin - 2);
    xmax = std::min(kScene - 1, xmax + 2);
    ymax = std::min(kScene - 1, ymax + 2);
    for (int y = ymin; y <= ymax; ++y) {
        for (int x = xmin; x <= xmax; ++x) m.raw()[(kScene + y) * kScene + x] = 1.0;
    }
    return m;
}

namespace {

std::vector<int> draw_text(Rng& rng) {
    const int k = 2 + static_cast<int>(rng.next_u64() % 3);
    std::vector<int> t(static_cast<std::size_t>(k));
    for (auto& g : t) g = static_cast<int>(rng.next_u64() % kGlyphsPerScript);
    return t;
}

int draw_y0(Rng& rng) {
    const int ys[3] = {8, 12, 16};
    return ys[rng.next_u64() % 3];
}

}  // namespace

SampleRecord compose_sample(Rng& rng, Mode mode, Lang lang) {
    SampleRecord r;
    r.mode = mode;
    r.lang = lang;
    r.script = rng.next_u64() % 2 == 0 ? Script::A : Script::B;
    r.text = draw_text(rng);
    r.style = sample_style(rng);
    r.y0 = draw_y0(rng);
    r.x0 = line_x0(static_cast<int>(r.text.size()));

    auto [scene, tmask] = render_glyph_line(r.text, r.script, r.style, r.x0, r.y0, rng);
    r.scene = scene;
    r.text_mask = tmask;
    r.glyph_map = Tensor::full({kScene, kScene}, 1.0);
    Tensor plain = rasterize_text(r.text, r.script, 1, r.x0, r.y0);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        if (plain.data()[i] > 0.5) r.glyph_map.raw()[i] = 0.0;
    }
    r.concat = concat_glyph_scene(r.glyph_map, r.scene);
    r.inpaint_mask = text_region_mask(r.text_mask);

    if (mode == Mode::Self) {
        r.style_ref = r.scene;
        r.style_ref_mask = r.text_mask;
        r.ref_text = r.text;
        r.ref_script = r.script;
        r.ref_x0 = r.x0;
        r.ref_y0 = r.y0;
    } else {
        r.ref_script = lang == Lang::Cross ? (r.script == Script::A ? Script::B : Script::A) : r.script;
        do {
            r.ref_text = draw_text(rng);
        } while (r.ref_script == r.script && r.ref_text == r.text);
        StyleSpec ref_style = r.style;
        sample_bg_into(ref_style, rng);
        r.ref_y0 = draw_y0(rng);
        r.ref_x0 = line_x0(static_cast<int>(r.ref_text.size()));
        auto [ref_img, ref_mask] = render_glyph_line(r.ref_text, r.ref_script, ref_style, r.ref_x0, r.ref_y0, rng);
        r.style_ref = ref_img;
        r.style_ref_mask = ref_mask;
    }
    return r;
}

std::string make_split(const std::string& dir, const std::string& kind, int n, std::uint64_t seed) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("make_split: cannot create " + dir);

    const std::uint64_t stream_base = kind == "train" ? 0 : (1ULL << 30);
    const std::string manifest_path = dir + "/manifest.txt";
    std::ofstream mf(manifest_path);
    if (!mf) throw IoError("make_split: cannot write " + manifest_path);

    Rng base(seed);
    static const Mode modes[4] = {Mode::Self, Mode::External, Mode::Self, Mode::External};
    static const Lang langs[4] = {Lang::Mono, Lang::Mono, Lang::Cross, Lang::Cross};
    for (int i = 0; i < n; ++i) {
        Rng rng = base.split(stream_base + static_cast<std::uint64_t>(i));
        SampleRecord r = compose_sample(rng, modes[i % 4], langs[i % 4]);

        char id[16];
        std::snprintf(id, sizeof(id), "s%04d", i);
        const std::string scene_p = std::string(id) + "_scene.ppm";
        const std::string glyph_p = std::string(id) + "_glyph.pgm";
        const std::string mask_p = std::string(id) + "_mask.pgm";
        const std::string tmask_p = std::string(id) + "_tmask.pgm";
        const std::string ref_p = std::string(id) + "_ref.ppm";
        const std::string refmask_p = std::string(id) + "_refmask.pgm";
        write_ppm(dir + "/" + scene_p, r.scene);
        write_pgm(dir + "/" + glyph_p, r.glyph_map);
        write_pgm(dir + "/" + mask_p, r.inpaint_mask);
        write_pgm(dir + "/" + tmask_p, r.text_mask);
        write_ppm(dir + "/" + ref_p, r.style_ref);
        write_pgm(dir + "/" + refmask_p, r.style_ref_mask);

        mf << i << '\t' << mode_str(r.mode) << '\t' << lang_str(r.lang) << '\t' << script_str(r.script) << '\t'
           << text_to_string(r.text) << '\t' << r.x0 << '\t' << r.y0 << '\t' << script_str(r.ref_script) << '\t'
           << text_to_string(r.ref_text) << '\t' << r.ref_x0 << '\t' << r.ref_y0 << '\t' << scene_p << '\t'
           << glyph_p << '\t' << mask_p << '\t' << tmask_p << '\t' << ref_p << '\t' << refmask_p << '\t'
           << style_to_string(r.style) << '\n';
    }
    mf.close();
    if (!mf) throw IoError("make_split: write failed for " + manifest_path);
    return manifest_path;
}

std::vector<ManifestEntry> read_manifest(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_manifest: cannot open " + path);
    std::vector<ManifestEntry> out;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<std::string> p;
        std::stringstream ss(line);
        std::string tok;
        while (std::getline(ss, tok, '\t')) p.push_back(tok);
        if (p.size() != 18) throw IoError("read_manifest: expected 18 fields, got " + std::to_string(p.size()));
        ManifestEntry e;
        e.id = std::stoi(p[0]);
        e.mode = mode_parse(p[1]);
        e.lang = lang_parse(p[2]);
        e.script = script_parse(p[3]);
        e.text = text_from_string(p[4]);
        e.x0 = std::stoi(p[5]);
        e.y0 = std::stoi(p[6]);
        e.ref_script = script_parse(p[7]);
        e.ref_text = text_from_string(p[8]);
        e.ref_x0 = std::stoi(p[9]);
        e.ref_y0 = std::stoi(p[10]);
        e.scene_path = p[11];
        e.glyph_path = p[12];
        e.mask_path = p[13];
        e.tmask_path = p[14];
        e.ref_path = p[15];
        e.refmask_path = p[16];
        e.style = style_from_string(p[17]);
        out.push_back(std::move(e));
    }
    return out;
}

SampleRecord load_sample(const ManifestEntry& e, const std::string& dir) {
    SampleRecord r;
    r.mode = e.mode;
    r.lang = e.lang;
    r.script = e.script;
    r.text = e.text;
    r.x0 = e.x0;
    r.y0 = e.y0;
    r.ref_script = e.ref_script;
    r.ref_text = e.ref_text;
    r.ref_x0 = e.ref_x0;
    r.ref_y0 = e.ref_y0;
    r.style = e.style;
    r.scene = read_ppm(dir + "/" + e.scene_path);
    r.glyph_map = read_pgm(dir + "/" + e.glyph_path);
    r.inpaint_mask = read_pgm(dir + "/" + e.mask_path);
    r.text_mask = read_pgm(dir + "/" + e.tmask_path);
    r.style_ref = read_ppm(dir + "/" + e.ref_path);
    r.style_ref_mask = read_pgm(dir + "/" + e.refmask_path);
    r.concat = concat_glyph_scene(r.glyph_map, r.scene);
    return r;
}

std::string text_to_string(const std::vector<int>& text) {
    std::string s;
    for (int g : text) s += static_cast<char>('0' + g);
    return s;
}

std::vector<int> text_from_string(const std::string& s) {
    std::vector<int> t;
    for (char c : s) t.push_back(c - '0');
    return t;
}

}  // namespace stgn::synth
