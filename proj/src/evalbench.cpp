#include "stgn/evalbench.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "stgn/error.hpp"
#include "stgn/style_loss.hpp"
#include "stgn/tensor.hpp"

namespace stgn::eval {

namespace {

constexpr double kSegThreshold = 0.15;
constexpr double kCovEps = 1e-6;

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Symmetric d x d eigendecomposition by cyclic Jacobi rotations. a is
// row-major and is destroyed; eigenvalues land on its diagonal.
void jacobi_eigen(std::vector<double>& a, int d, std::vector<double>* vecs) {
    if (vecs) {
        vecs->assign(static_cast<std::size_t>(d) * d, 0.0);
        for (int i = 0; i < d; ++i) (*vecs)[i * d + i] = 1.0;
    }
    for (int sweep = 0; sweep < 100; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) off += a[p * d + q] * a[p * d + q];
        }
        if (off < 1e-24) return;
        for (int p = 0; p < d; ++p) {
            for (int q = p + 1; q < d; ++q) {
                const double apq = a[p * d + q];
                if (std::fabs(apq) < 1e-18) continue;
                const double theta = (a[q * d + q] - a[p * d + p]) / (2.0 * apq);
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < d; ++i) {
                    const double aip = a[i * d + p], aiq = a[i * d + q];
                    a[i * d + p] = c * aip - s * aiq;
                    a[i * d + q] = s * aip + c * aiq;
                }
                for (int i = 0; i < d; ++i) {
                    const double api = a[p * d + i], aqi = a[q * d + i];
                    a[p * d + i] = c * api - s * aqi;
                    a[q * d + i] = s * api + c * aqi;
                }
                if (vecs) {
                    for (int i = 0; i < d; ++i) {
                        const double vip = (*vecs)[i * d + p], viq = (*vecs)[i * d + q];
                        (*vecs)[i * d + p] = c * vip - s * viq;
                        (*vecs)[i * d + q] = s * vip + c * viq;
                    }
                }
            }
        }
    }
}

// Principal square root of a symmetric PSD matrix; negative eigenvalues from
// roundoff are clamped to zero.
std::vector<double> sqrt_psd(std::vector<double> a, int d) {
    std::vector<double> v;
    jacobi_eigen(a, d, &v);
    std::vector<double> out(static_cast<std::size_t>(d) * d, 0.0);
    for (int k = 0; k < d; ++k) {
        const double lam = std::sqrt(std::max(a[k * d + k], 0.0));
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) out[i * d + j] += lam * v[i * d + k] * v[j * d + k];
        }
    }
    return out;
}

std::vector<double> matmul_sq(const std::vector<double>& a, const std::vector<double>& b, int d) {
    std::vector<double> out(static_cast<std::size_t>(d) * d, 0.0);
    for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) {
            const double aik = a[i * d + k];
            for (int j = 0; j < d; ++j) out[i * d + j] += aik * b[k * d + j];
        }
    }
    return out;
}

// Mean vector and (+eps I regularized) covariance of a feature batch.
void moments(const std::vector<Tensor>& feats, std::vector<double>& mu, std::vector<double>& cov, int d) {
    const double n = static_cast<double>(feats.size());
    mu.assign(static_cast<std::size_t>(d), 0.0);
    for (const Tensor& f : feats) {
        for (int i = 0; i < d; ++i) mu[static_cast<std::size_t>(i)] += f.data()[i] / n;
    }
    cov.assign(static_cast<std::size_t>(d) * d, 0.0);
    for (const Tensor& f : feats) {
        for (int i = 0; i < d; ++i) {
            for (int j = 0; j < d; ++j) {
                cov[i * d + j] += (f.data()[i] - mu[static_cast<std::size_t>(i)]) *
                                  (f.data()[j] - mu[static_cast<std::size_t>(j)]) / n;
            }
        }
    }
    for (int i = 0; i < d; ++i) cov[i * d + i] += kCovEps;
}

std::string mode_lang_label(synth::Mode m, synth::Lang l) {
    return std::string(m == synth::Mode::Self ? "self" : "external") + "_" +
           (l == synth::Lang::Mono ? "mono" : "cross");
}

Tensor scene_half(const Tensor& canvas) {
    if (canvas.rank() == 3) {
        Tensor out = Tensor::zeros({synth::kScene, canvas.dim(1), 3});
        const long base = static_cast<long>(synth::kScene) * canvas.dim(1) * 3;
        std::copy(canvas.data().begin() + base, canvas.data().end(), out.raw().begin());
        return out;
    }
    Tensor out = Tensor::zeros({synth::kScene, canvas.dim(1)});
    const long base = static_cast<long>(synth::kScene) * canvas.dim(1);
    std::copy(canvas.data().begin() + base, canvas.data().end(), out.raw().begin());
    return out;
}

bool mask_empty(const Tensor& m) {
    for (double v : m.data()) {
        if (v > 0.5) return false;
    }
    return true;
}

}  // namespace

Tensor threshold_segment(const Tensor& img, const Tensor& region) {
    if (img.rank() != 3 || region.rank() != 2 || img.dim(0) != region.dim(0) || img.dim(1) != region.dim(1)) {
        throw ShapeError("threshold_segment: " + shape_str(img.shape()) + " vs " + shape_str(region.shape()));
    }
    const int h = img.dim(0), w = img.dim(1);
    // border ring: non-region pixels 8-adjacent to a region pixel
    std::vector<double> ring[3];
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (region.data()[y * w + x] > 0.5) continue;
            bool adj = false;
            for (int dy = -1; dy <= 1 && !adj; ++dy) {
                for (int dx = -1; dx <= 1 && !adj; ++dx) {
                    const int ny = y + dy, nx = x + dx;
                    if (ny >= 0 && ny < h && nx >= 0 && nx < w && region.data()[ny * w + nx] > 0.5) adj = true;
                }
            }
            if (adj) {
                for (int c = 0; c < 3; ++c) ring[c].push_back(img.data()[(y * w + x) * 3 + c]);
            }
        }
    }
    if (ring[0].size() < 4) throw DomainError("threshold_segment: degenerate region border");
    const double bg[3] = {median(ring[0]), median(ring[1]), median(ring[2])};
    Tensor mask = Tensor::zeros({h, w});
    for (int p = 0; p < h * w; ++p) {
        if (region.data()[p] <= 0.5) continue;
        double score = 0.0;
        for (int c = 0; c < 3; ++c) score += std::fabs(img.data()[p * 3 + c] - bg[c]) / 3.0;
        if (score > kSegThreshold) mask.raw()[p] = 1.0;
    }
    return mask;
}

std::vector<int> ocr_decode(const Tensor& img, const Tensor& region, int x0, int y0, int k) {
    if (k < 1 || x0 < 0 || y0 < 0 || x0 + k * synth::kCell > img.dim(1) || y0 + synth::kCell > img.dim(0)) {
        throw DomainError("ocr_decode: cells outside image");
    }
    Tensor bin = threshold_segment(img, region);
    std::vector<int> out;
    for (int i = 0; i < k; ++i) {
        int best = 0, best_ham = 1 << 20;
        for (int g = 0; g < 2 * synth::kGlyphsPerScript; ++g) {
            for (int w = 1; w <= 2; ++w) {
                Tensor tpl = synth::glyph_template(g, w);
                int ham = 0;
                for (int y = 0; y < synth::kCell; ++y) {
                    for (int x = 0; x < synth::kCell; ++x) {
                        const bool on = bin.data()[(y0 + y) * img.dim(1) + x0 + i * synth::kCell + x] > 0.5;
                        ham += on != (tpl.data()[y * synth::kCell + x] > 0.5);
                    }
                }
                if (ham < best_ham) {
                    best_ham = ham;
                    best = g;
                }
            }
        }
        out.push_back(best);
    }
    return out;
}

std::string glyphs_to_string(const std::vector<int>& glyphs20) {
    static const char* alphabet = "0123456789abcdefghij";
    std::string s;
    for (int g : glyphs20) {
        if (g < 0 || g >= 20) throw DomainError("glyphs_to_string: id " + std::to_string(g));
        s += alphabet[g];
    }
    return s;
}

std::string truth_string(synth::Script script, const std::vector<int>& text) {
    std::vector<int> g;
    for (int t : text) g.push_back(script == synth::Script::B ? t + synth::kGlyphsPerScript : t);
    return glyphs_to_string(g);
}

AccNed sen_acc_ned(const std::string& pred, const std::string& truth) {
    if (pred.empty() && truth.empty()) return {1, 1.0};
    const std::size_t n = pred.size(), m = truth.size();
    std::vector<std::size_t> prev(m + 1), cur(m + 1);
    for (std::size_t j = 0; j <= m; ++j) prev[j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t sub = prev[j - 1] + (pred[i - 1] != truth[j - 1]);
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
        }
        std::swap(prev, cur);
    }
    const double lev = static_cast<double>(prev[m]);
    AccNed r;
    r.acc = pred == truth ? 1 : 0;
    r.ned = 1.0 - lev / static_cast<double>(std::max(n, m));
    return r;
}

Tensor pooled_style_features(const Tensor& img, const Tensor& mask) {
    if (mask.rank() != 2 || mask.dim(0) != img.dim(0) || mask.dim(1) != img.dim(1)) {
        throw ShapeError("pooled_style_features: mask " + shape_str(mask.shape()));
    }
    NoGradGuard ng;
    Tensor f3 = style_loss::feature_pyramid(img).back();  // [c x N]
    const int c = f3.dim(0), n = f3.dim(1);
    const int grid = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
    const int factor = img.dim(0) / grid;
    // token weight = mean of the mask over the token's receptive cell
    std::vector<double> w(static_cast<std::size_t>(n), 0.0);
    double total = 0.0;
    for (int ty = 0; ty < grid; ++ty) {
        for (int tx = 0; tx < grid; ++tx) {
            double s = 0.0;
            for (int y = ty * factor; y < (ty + 1) * factor; ++y) {
                for (int x = tx * factor; x < (tx + 1) * factor; ++x) s += mask.data()[y * img.dim(1) + x];
            }
            w[static_cast<std::size_t>(ty * grid + tx)] = s;
            total += s;
        }
    }
    if (total <= 0.0) throw DomainError("pooled_style_features: empty mask");
    Tensor out = Tensor::zeros({c});
    for (int i = 0; i < c; ++i) {
        double acc = 0.0;
        for (int j = 0; j < n; ++j) acc += w[static_cast<std::size_t>(j)] * f3.data()[i * n + j];
        out.raw()[i] = acc / total;
    }
    return out;
}

StyleDistance masked_style_distance(const std::vector<Tensor>& gen, const std::vector<Tensor>& m_gen,
                                    const std::vector<Tensor>& ref, const std::vector<Tensor>& m_ref) {
    if (gen.size() < 2 || ref.size() < 2) throw DomainError("masked_style_distance: batch < 2");
    if (gen.size() != m_gen.size() || ref.size() != m_ref.size() || gen.size() != ref.size()) {
        throw ShapeError("masked_style_distance: batch sizes disagree");
    }
    std::vector<Tensor> fg, fr;
    for (std::size_t i = 0; i < gen.size(); ++i) fg.push_back(pooled_style_features(gen[i], m_gen[i]));
    for (std::size_t i = 0; i < ref.size(); ++i) fr.push_back(pooled_style_features(ref[i], m_ref[i]));
    const int d = fg[0].dim(0);

    std::vector<double> mu1, mu2, c1, c2;
    moments(fg, mu1, c1, d);
    moments(fr, mu2, c2, d);

    double mean_sq = 0.0, tr1 = 0.0, tr2 = 0.0;
    for (int i = 0; i < d; ++i) {
        const double dm = mu1[static_cast<std::size_t>(i)] - mu2[static_cast<std::size_t>(i)];
        mean_sq += dm * dm;
        tr1 += c1[i * d + i];
        tr2 += c2[i * d + i];
    }
    // tr sqrt(C1 C2) via the symmetric form sqrt(C1)^T C2 sqrt(C1)
    std::vector<double> h1 = sqrt_psd(c1, d);
    std::vector<double> inner = matmul_sq(matmul_sq(h1, c2, d), h1, d);
    jacobi_eigen(inner, d, nullptr);
    double tr_sqrt = 0.0;
    for (int i = 0; i < d; ++i) tr_sqrt += std::sqrt(std::max(inner[i * d + i], 0.0));

    StyleDistance out;
    out.frechet = std::max(0.0, mean_sq + tr1 + tr2 - 2.0 * tr_sqrt);
    double fd = 0.0;
    for (std::size_t i = 0; i < fg.size(); ++i) {
        double s = 0.0;
        for (int j = 0; j < d; ++j) {
            const double diff = fg[i].data()[j] - fr[i].data()[j];
            s += diff * diff;
        }
        fd += std::sqrt(s);
    }
    out.feat_dist = fd / static_cast<double>(fg.size());
    return out;
}

BenchReport run_benchmark(const Sampler& sampler, const std::string& split_dir, std::uint64_t seed,
                          const std::string& config_hash, const std::string& checkpoint_id) {
    auto entries = synth::read_manifest(split_dir + "/manifest.txt");
    BenchReport rep;
    rep.config_hash = config_hash;
    rep.checkpoint_id = checkpoint_id;
    rep.seed = seed;

    struct Bucket {
        int n = 0;
        double acc = 0, ned = 0;
        std::vector<Tensor> gen, m_gen, ref, m_ref;
    };
    Bucket buckets[4];

    Rng base(seed);
    for (const auto& e : entries) {
        synth::SampleRecord r = synth::load_sample(e, split_dir);
        Rng rng = base.split(static_cast<std::uint64_t>(e.id));
        Tensor canvas = sampler(r, rng);
        Tensor gen_scene = scene_half(canvas);
        Tensor region = scene_half(r.inpaint_mask);

        std::vector<int> pred = ocr_decode(gen_scene, region, r.x0, r.y0, static_cast<int>(r.text.size()));
        AccNed an = sen_acc_ned(glyphs_to_string(pred), truth_string(r.script, r.text));

        Tensor gen_seg = threshold_segment(gen_scene, region);
        if (mask_empty(gen_seg)) gen_seg = region;  // degenerate output still scores
        Tensor ref_region = scene_half(synth::text_region_mask(r.style_ref_mask));
        Tensor ref_seg = threshold_segment(r.style_ref, ref_region);
        if (mask_empty(ref_seg)) ref_seg = ref_region;

        const int idx = (r.mode == synth::Mode::External ? 2 : 0) + (r.lang == synth::Lang::Cross ? 1 : 0);
        Bucket& b = buckets[idx];
        b.n += 1;
        b.acc += an.acc;
        b.ned += an.ned;
        b.gen.push_back(gen_scene);
        b.m_gen.push_back(gen_seg);
        b.ref.push_back(r.style_ref);
        b.m_ref.push_back(ref_seg);
    }

    static const synth::Mode kModes[4] = {synth::Mode::Self, synth::Mode::Self, synth::Mode::External,
                                          synth::Mode::External};
    static const synth::Lang kLangs[4] = {synth::Lang::Mono, synth::Lang::Cross, synth::Lang::Mono,
                                          synth::Lang::Cross};
    for (int i = 0; i < 4; ++i) {
        const Bucket& b = buckets[i];
        if (b.n < 2) throw DomainError("run_benchmark: setting " + mode_lang_label(kModes[i], kLangs[i]) +
                                       " has fewer than 2 samples");
        StyleDistance sd = masked_style_distance(b.gen, b.m_gen, b.ref, b.m_ref);
        BenchSetting s;
        s.mode = kModes[i];
        s.lang = kLangs[i];
        s.n = b.n;
        s.sen_acc = b.acc / b.n;
        s.ned = b.ned / b.n;
        s.masked_frechet = sd.frechet;
        s.masked_feat_dist = sd.feat_dist;
        rep.settings.push_back(s);
    }
    return rep;
}

void write_report(const BenchReport& report, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("write_report: cannot write " + path);
    f << "config_hash " << report.config_hash << "\n";
    f << "checkpoint " << report.checkpoint_id << "\n";
    f << "seed " << report.seed << "\n";
    f << "columns setting n sen_acc ned masked_frechet_proxy masked_feat_dist_proxy\n";
    f.precision(17);
    for (const auto& s : report.settings) {
        f << mode_lang_label(s.mode, s.lang) << ' ' << s.n << ' ' << s.sen_acc << ' ' << s.ned << ' '
          << s.masked_frechet << ' ' << s.masked_feat_dist << "\n";
    }
    f.close();
    if (!f) throw IoError("write_report: write failed for " + path);
}

BenchReport read_report(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("read_report: cannot open " + path);
    BenchReport rep;
    std::string key;
    f >> key >> rep.config_hash;
    if (key != "config_hash") throw IoError("read_report: bad header in " + path);
    f >> key >> rep.checkpoint_id;
    f >> key >> rep.seed;
    std::string line;
    std::getline(f, line);  // rest of seed line
    std::getline(f, line);  // columns line
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string label;
        BenchSetting s;
        ss >> label >> s.n >> s.sen_acc >> s.ned >> s.masked_frechet >> s.masked_feat_dist;
        if (!ss) throw IoError("read_report: bad row in " + path);
        s.mode = label.rfind("external", 0) == 0 ? synth::Mode::External : synth::Mode::Self;
        s.lang = label.find("cross") != std::string::npos ? synth::Lang::Cross : synth::Lang::Mono;
        rep.settings.push_back(s);
    }
    return rep;
}

}  // namespace stgn::eval
