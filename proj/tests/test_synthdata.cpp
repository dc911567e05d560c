#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>

#include "stgn/synthdata.hpp"

using namespace stgn;
using namespace stgn::synth;

namespace {

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

// Independent coverage oracle: stamp densely sampled points along each
// stroke and mark cell pixels whose center lies within the stroke radius.
// The slack absorbs the sampling quantization at exact-boundary pixels;
// true pixel distances never fall inside (r, r + 1e-5].
Tensor stamp_oracle(const std::vector<int>& text, Script s, int width, int x0, int y0) {
    Tensor m = Tensor::zeros({32, 32});
    const double r = width / 2.0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        for (const Segment& seg : glyph_strokes(s, text[i])) {
            for (int k = 0; k <= 4000; ++k) {
                const double t = k / 4000.0;
                const double sx = x0 + 8.0 * static_cast<double>(i) + seg.x1 + t * (seg.x2 - seg.x1);
                const double sy = y0 + seg.y1 + t * (seg.y2 - seg.y1);
                for (int py = y0; py < y0 + 8; ++py) {
                    for (int px = static_cast<int>(i) * 8 + x0; px < static_cast<int>(i + 1) * 8 + x0; ++px) {
                        if (std::hypot(px + 0.5 - sx, py + 0.5 - sy) <= r + 1e-5) m.raw()[py * 32 + px] = 1.0;
                    }
                }
            }
        }
    }
    return m;
}

}  // namespace

TEST_CASE("stroke tables: counts per script, nonempty glyphs") {
    for (int i = 0; i < 10; ++i) {
        const auto na = glyph_strokes(Script::A, i).size();
        const auto nb = glyph_strokes(Script::B, i).size();
        CHECK(na >= 2);
        CHECK(na <= 4);
        CHECK(nb >= 5);
        CHECK(nb <= 8);
    }
    CHECK_THROWS_AS(glyph_strokes(Script::A, 10), DomainError);
}

TEST_CASE("glyph templates: all 40 rasters are pairwise distinct and nonempty") {
    std::vector<Tensor> temps;
    for (int w = 1; w <= 2; ++w) {
        for (int g = 0; g < 20; ++g) temps.push_back(glyph_template(g, w));
    }
    for (auto& t : temps) {
        int ink = 0;
        for (double v : t.raw()) ink += v > 0.5;
        CHECK(ink > 0);
    }
    for (std::size_t a = 0; a < temps.size(); ++a) {
        for (std::size_t b = a + 1; b < temps.size(); ++b) {
            int ham = 0;
            for (int i = 0; i < 64; ++i) ham += (temps[a].data()[i] > 0.5) != (temps[b].data()[i] > 0.5);
            CHECK(ham > 0);
        }
    }
}

TEST_CASE("rasterize_text matches the dense stamping oracle") {
    std::vector<int> text{3, 7, 1};
    for (Script s : {Script::A, Script::B}) {
        for (int w : {1, 2}) {
            Tensor mask = rasterize_text(text, s, w, line_x0(3), 12);
            Tensor oracle = stamp_oracle(text, s, w, line_x0(3), 12);
            for (int i = 0; i < 32 * 32; ++i) CHECK(mask.data()[i] == oracle.data()[i]);
        }
    }
    CHECK_THROWS_AS(rasterize_text({1}, Script::A, 1, 0, 0), DomainError);
    CHECK_THROWS_AS(rasterize_text({1, 2, 3, 4}, Script::A, 1, 4, 0), DomainError);
}

TEST_CASE("render_glyph_line: constant fill without gradient or noise") {
    StyleSpec st;
    st.fg = {0.9, 0.1, 0.2};
    st.bg_a = {0.1, 0.6, 0.9};
    st.bg_kind = 0;
    Rng rng(5);
    auto [img, mask] = render_glyph_line({2, 5}, Script::A, st, line_x0(2), 8, rng);
    for (int p = 0; p < 32 * 32; ++p) {
        for (int c = 0; c < 3; ++c) {
            const double want = mask.data()[p] > 0.5 ? st.fg[c] : st.bg_a[c];
            CHECK(img.data()[p * 3 + c] == want);
        }
    }
}

TEST_CASE("render_glyph_line: deterministic per seed with noise") {
    StyleSpec st;
    st.fg = {0.9, 0.9, 0.9};
    st.bg_a = {0.1, 0.1, 0.1};
    st.texture_noise = 0.1;
    Rng r1(9), r2(9);
    auto [a, ma] = render_glyph_line({0, 1, 2}, Script::B, st, line_x0(3), 12, r1);
    auto [b, mb] = render_glyph_line({0, 1, 2}, Script::B, st, line_x0(3), 12, r2);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.data()[i] == b.data()[i]);
    (void)ma;
    (void)mb;
}

TEST_CASE("sample_style obeys the legibility and background-variation constraints") {
    Rng rng(11);
    auto lum = [](const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; };
    auto cdist = [](const Rgb& a, const Rgb& b) {
        return (std::fabs(a[0] - b[0]) + std::fabs(a[1] - b[1]) + std::fabs(a[2] - b[2])) / 3.0;
    };
    for (int i = 0; i < 200; ++i) {
        StyleSpec s = sample_style(rng);
        CHECK((s.stroke_width == 1 || s.stroke_width == 2));
        CHECK(s.texture_noise <= 0.15);
        for (const Rgb& bg : {s.bg_a, s.bg_b}) {
            CHECK(std::fabs(lum(s.fg) - lum(bg)) >= 0.2);
            CHECK(cdist(s.fg, bg) >= 0.35);
        }
        for (int c = 0; c < 3; ++c) CHECK(std::fabs(s.bg_a[c] - s.bg_b[c]) <= 0.1 + 1e-12);
    }
}

TEST_CASE("concat_glyph_scene stacks glyph atop scene") {
    Rng rng(13);
    Tensor glyph = Tensor::zeros({32, 32});
    for (auto& v : glyph.raw()) v = rng.uniform() > 0.5 ? 1.0 : 0.0;
    Tensor scene = Tensor::zeros({32, 32, 3});
    for (auto& v : scene.raw()) v = rng.uniform();

    Tensor cat = concat_glyph_scene(glyph, scene);
    CHECK(cat.shape() == Shape{64, 32, 3});
    for (int p = 0; p < 32 * 32; ++p) {
        for (int c = 0; c < 3; ++c) {
            CHECK(cat.data()[p * 3 + c] == glyph.data()[p]);
            CHECK(cat.data()[(32 * 32 + p) * 3 + c] == scene.data()[p * 3 + c]);
        }
    }
    CHECK_THROWS_AS(concat_glyph_scene(Tensor::zeros({32, 16}), scene), ShapeError);
}

TEST_CASE("compose_sample: reference contracts per mode and lang") {
    Rng r1(17);
    SampleRecord self = compose_sample(r1, Mode::Self, Lang::Mono);
    for (std::size_t i = 0; i < self.scene.size(); ++i) CHECK(self.style_ref.data()[i] == self.scene.data()[i]);

    Rng r2(18);
    SampleRecord ext = compose_sample(r2, Mode::External, Lang::Mono);
    CHECK(ext.ref_script == ext.script);
    CHECK(text_to_string(ext.ref_text) != text_to_string(ext.text));

    Rng r3(19);
    SampleRecord cross = compose_sample(r3, Mode::External, Lang::Cross);
    CHECK(cross.ref_script != cross.script);
}

TEST_CASE("compose_sample: mask geometry invariants") {
    Rng rng(21);
    for (int it = 0; it < 20; ++it) {
        SampleRecord r = compose_sample(rng, it % 2 ? Mode::External : Mode::Self, Lang::Mono);
        // glyph half of the inpaint mask is zero
        for (int i = 0; i < 32 * 32; ++i) CHECK(r.inpaint_mask.data()[i] == 0.0);
        // text_mask sits inside the scene half of the inpaint mask
        for (int p = 0; p < 32 * 32; ++p) {
            if (r.text_mask.data()[p] > 0.5) CHECK(r.inpaint_mask.data()[32 * 32 + p] == 1.0);
        }
        // glyph map depicts the text at width 1, ink 0 on white 1
        Tensor plain = rasterize_text(r.text, r.script, 1, r.x0, r.y0);
        for (int p = 0; p < 32 * 32; ++p) {
            CHECK(r.glyph_map.data()[p] == (plain.data()[p] > 0.5 ? 0.0 : 1.0));
        }
    }
}

TEST_CASE("make_split: counts, determinism, disjoint train/bench") {
    namespace fs = std::filesystem;
    const std::string base = fs::temp_directory_path() / "stgn_synth_test";
    fs::remove_all(base);

    const std::string m1 = make_split(base + "/bench", "bench", 8, 99);
    auto entries = read_manifest(m1);
    REQUIRE(entries.size() == 8);
    int counts[2][2] = {};
    for (const auto& e : entries) counts[e.mode == Mode::Self ? 0 : 1][e.lang == Lang::Mono ? 0 : 1]++;
    CHECK(counts[0][0] == 2);
    CHECK(counts[0][1] == 2);
    CHECK(counts[1][0] == 2);
    CHECK(counts[1][1] == 2);

    make_split(base + "/bench2", "bench", 8, 99);
    for (const auto& e : entries) {
        CHECK(slurp(base + "/bench/" + e.scene_path) == slurp(base + "/bench2/" + e.scene_path));
    }
    CHECK(slurp(m1) == slurp(base + "/bench2/manifest.txt"));

    make_split(base + "/train", "train", 8, 99);
    auto train = read_manifest(base + "/train/manifest.txt");
    std::set<std::string> bench_bytes;
    for (const auto& e : entries) bench_bytes.insert(slurp(base + "/bench/" + e.scene_path));
    for (const auto& e : train) {
        CHECK(bench_bytes.count(slurp(base + "/train/" + e.scene_path)) == 0);
    }
    fs::remove_all(base);
}

TEST_CASE("manifest round trip preserves metadata, image loads stay close") {
    namespace fs = std::filesystem;
    const std::string dir = fs::temp_directory_path() / "stgn_synth_rt";
    fs::remove_all(dir);
    make_split(dir, "train", 4, 7);
    auto entries = read_manifest(dir + "/manifest.txt");
    REQUIRE(entries.size() == 4);

    Rng rng(7);
    for (const auto& e : entries) {
        Rng srng = rng.split(static_cast<std::uint64_t>(e.id));
        static const Mode modes[4] = {Mode::Self, Mode::External, Mode::Self, Mode::External};
        static const Lang langs[4] = {Lang::Mono, Lang::Mono, Lang::Cross, Lang::Cross};
        SampleRecord orig = compose_sample(srng, modes[e.id % 4], langs[e.id % 4]);
        SampleRecord loaded = load_sample(e, dir);

        CHECK(text_to_string(loaded.text) == text_to_string(orig.text));
        CHECK(loaded.x0 == orig.x0);
        CHECK(loaded.y0 == orig.y0);
        CHECK(same_fg_style(loaded.style, orig.style));
        // masks are exact through the 8-bit round trip, scenes within a step
        for (std::size_t i = 0; i < orig.text_mask.size(); ++i) {
            CHECK(loaded.text_mask.data()[i] == orig.text_mask.data()[i]);
            CHECK(loaded.inpaint_mask.data()[i] == orig.inpaint_mask.data()[i]);
        }
        for (std::size_t i = 0; i < orig.scene.size(); ++i) {
            CHECK(std::fabs(loaded.scene.data()[i] - orig.scene.data()[i]) <= 0.5 / 255.0 + 1e-12);
        }
        CHECK(loaded.concat.shape() == Shape{64, 32, 3});
    }
    fs::remove_all(dir);
}
