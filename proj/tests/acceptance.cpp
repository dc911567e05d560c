// Acceptance gate: ten end-to-end criteria over the full pipeline, printed as
// one pass/fail line each. Exits 0 iff every criterion passes.
//
// Usage: acceptance <path-to-stgn-binary>
//
// The run trains one encoder and six denoisers (3 seeds x {lambda 0, 10}) on a
// freshly generated split, so a full pass takes on the order of an hour.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "stgn/checkpoint.hpp"
#include "stgn/config.hpp"
#include "stgn/evalbench.hpp"
#include "stgn/flow.hpp"
#include "stgn/injection.hpp"
#include "stgn/ops.hpp"
#include "stgn/pipeline.hpp"
#include "stgn/style_loss.hpp"
#include "stgn/synthdata.hpp"

namespace fs = std::filesystem;
namespace op = stgn::ops;
namespace sy = stgn::synth;
using stgn::Rng;
using stgn::Tensor;

namespace {

struct Criterion {
    int id;
    std::string name;
    bool pass;
    std::string detail;
};

std::vector<Criterion> g_results;

void record(int id, const std::string& name, bool pass, const std::string& detail) {
    g_results.push_back({id, name, pass, detail});
    std::fprintf(stderr, "[acceptance] criterion %2d %-28s %s (%s)\n", id, name.c_str(),
                 pass ? "PASS" : "FAIL", detail.c_str());
}

std::string fmt(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

double now_s() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

double median3(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.data()[i] != b.data()[i]) return false;
    }
    return true;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::fabs(a.data()[i] - b.data()[i]));
    return m;
}

Tensor rand_tensor(const stgn::Shape& shape, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.raw()) v = rng.normal();
    return t;
}

Tensor rand_mask(int n, Rng& rng) {
    Tensor m = Tensor::zeros({n});
    bool any = false;
    for (auto& v : m.raw()) {
        v = rng.uniform() > 0.5 ? 1.0 : 0.0;
        any = any || v > 0.5;
    }
    if (!any) m.raw()[static_cast<std::size_t>(rng.next_u64() % n)] = 1.0;
    return m;
}

// Scene half of a [64 x 32 (x3)] canvas, matching the benchmark's cropping.
Tensor scene_half(const Tensor& canvas) {
    const int w = canvas.dim(1);
    if (canvas.rank() == 3) {
        Tensor out = Tensor::zeros({sy::kScene, w, 3});
        std::copy(canvas.data().begin() + static_cast<long>(sy::kScene) * w * 3, canvas.data().end(),
                  out.raw().begin());
        return out;
    }
    Tensor out = Tensor::zeros({sy::kScene, w});
    std::copy(canvas.data().begin() + static_cast<long>(sy::kScene) * w, canvas.data().end(), out.raw().begin());
    return out;
}

stgn::ConditioningSet target_conditioning(const sy::SampleRecord& r) {
    stgn::ConditioningSet c;
    c.concat_input = r.concat;
    c.inpaint_mask = r.inpaint_mask;
    c.target_text = stgn::eval::truth_string(r.script, r.text);
    c.style_img = r.style_ref;
    return c;
}

stgn::ConditioningSet reference_conditioning(const sy::SampleRecord& r) {
    Tensor plain = sy::rasterize_text(r.ref_text, r.ref_script, 1, r.ref_x0, r.ref_y0);
    Tensor glyph = Tensor::full({sy::kScene, sy::kScene}, 1.0);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        if (plain.data()[i] > 0.5) glyph.raw()[i] = 0.0;
    }
    stgn::ConditioningSet c;
    c.concat_input = sy::concat_glyph_scene(glyph, r.style_ref);
    c.inpaint_mask = sy::text_region_mask(r.style_ref_mask);
    c.target_text = stgn::eval::truth_string(r.ref_script, r.ref_text);
    c.style_img = r.style_ref;
    return c;
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return f ? ss.str() : std::string("<unreadable:" + path + ">");
}

// ---------------------------------------------------------------------------

void criterion_1_gradients() {
    const double t0 = now_s();
    auto rows = stgn::pipeline::gradcheck_suite();
    const double elapsed = now_s() - t0;
    double worst = 0;
    for (const auto& r : rows) worst = std::max(worst, r.max_err);
    const bool pass = worst < 1e-4 && elapsed < 60.0;
    record(1, "gradient-suite", pass, "max_rel_err " + fmt(worst) + ", " + fmt(elapsed) + " s");
}

void criterion_2_identities() {
    Rng rng(501);
    bool endpoints = true, mask_ids = true, combination = true, gram_ok = true;

    for (int it = 0; it < 1000 && endpoints; ++it) {
        Tensor x0 = rand_tensor({3, 4}, rng);
        Tensor eps = rand_tensor({3, 4}, rng);
        endpoints = bitwise_equal(stgn::flow::interpolate(x0, eps, 0.0).xt, x0) &&
                    bitwise_equal(stgn::flow::interpolate(x0, eps, 1.0).xt, eps);
    }

    for (int it = 0; it < 1000 && mask_ids; ++it) {
        const int n = 6, d = 8;
        Tensor q = rand_tensor({n, d}, rng), k = rand_tensor({n, d}, rng), v = rand_tensor({n, d}, rng);
        stgn::flow::KvPair cache{rand_tensor({n, d}, rng), rand_tensor({n, d}, rng)};
        stgn::injection::TokenMasks masks;
        masks.m_style_tok = rand_mask(n, rng);

        masks.m_gen_tok = Tensor::zeros({n});
        auto [k0, v0] = stgn::injection::adapt_kv(k, v, cache, masks);
        mask_ids = bitwise_equal(k0, k) && bitwise_equal(v0, v) &&
                   bitwise_equal(stgn::injection::injected_attention(q, k, v, cache, masks, 2),
                                 op::mha(q, k, v, 2));

        masks.m_gen_tok = Tensor::full({n}, 1.0);
        auto [k1, v1] = stgn::injection::adapt_kv(k, v, cache, masks);
        mask_ids = mask_ids && bitwise_equal(k1, op::adain(k, cache.k, masks.m_style_tok)) &&
                   bitwise_equal(v1, op::adain(v, cache.v, masks.m_style_tok));
    }

    for (int it = 0; it < 1000 && combination; ++it) {
        Tensor l_cfm = Tensor::scalar(rng.uniform() * 3.0);
        Tensor l_tsc = Tensor::scalar(rng.uniform() * 0.5);
        auto rep = stgn::style_loss::total_loss(l_cfm, l_tsc, 10.0);
        combination = rep.total.value() == l_cfm.value() + 10.0 * l_tsc.value();
    }

    double psd_worst = 0, scale_worst = 0;
    for (int it = 0; it < 1000 && gram_ok; ++it) {
        const int c = 2 + static_cast<int>(rng.next_u64() % 5);
        const int n = 3 + static_cast<int>(rng.next_u64() % 9);
        Tensor f = rand_tensor({c, n}, rng);
        Tensor g = op::gram_matrix(f);
        for (int i = 0; i < c && gram_ok; ++i) {
            for (int j = 0; j < c; ++j) gram_ok = gram_ok && g.data()[i * c + j] == g.data()[j * c + i];
        }
        // PSD: x^T G x >= 0 up to roundoff, random probes
        for (int p = 0; p < 4; ++p) {
            Tensor x = rand_tensor({c}, rng);
            double quad = 0;
            for (int i = 0; i < c; ++i) {
                for (int j = 0; j < c; ++j) quad += x.data()[i] * g.data()[i * c + j] * x.data()[j];
            }
            psd_worst = std::min(psd_worst, quad);
        }
        const double s = 0.25 + rng.uniform() * 4.0;
        Tensor gs = op::gram_matrix(op::scale(f, s));
        for (std::size_t i = 0; i < gs.size(); ++i) {
            const double want = s * s * g.data()[i];
            const double rel = std::fabs(gs.data()[i] - want) / std::max({std::fabs(want), 1e-12});
            scale_worst = std::max(scale_worst, rel);
        }
    }
    gram_ok = gram_ok && psd_worst > -1e-12 && scale_worst < 1e-9;

    const bool pass = endpoints && mask_ids && combination && gram_ok;
    record(2, "equation-identities", pass,
           std::string("endpoints ") + (endpoints ? "ok" : "BAD") + ", mask ids " + (mask_ids ? "ok" : "BAD") +
               ", combination " + (combination ? "ok" : "BAD") + ", gram psd_min " + fmt(psd_worst) +
               " scale_err " + fmt(scale_worst));
}

void criterion_3_adain_moments() {
    Rng rng(77);
    double worst = 0;
    for (int it = 0; it < 1000; ++it) {
        const int n = 4 + static_cast<int>(rng.next_u64() % 13);
        const int m = 4 + static_cast<int>(rng.next_u64() % 13);
        const int c = 1 + static_cast<int>(rng.next_u64() % 6);
        Tensor x = rand_tensor({n, c}, rng);
        Tensor ref = rand_tensor({m, c}, rng);
        Tensor mask = rand_mask(m, rng);
        Tensor y = op::adain(x, ref, mask);
        auto [mu_t, sd_t] = op::masked_moments(ref, mask);
        auto [mu_y, sd_y] = op::masked_moments(y, Tensor::full({n}, 1.0));
        worst = std::max({worst, max_abs_diff(mu_y, mu_t), max_abs_diff(sd_y, sd_t)});
    }
    record(3, "adain-moment-matching", worst < 1e-6, "max moment err " + fmt(worst));
}

void criterion_9_metric_sanity() {
    // OCR on clean generator renders
    int wrong = 0, total = 0;
    double disagree = 0, region_px = 0;
    static const sy::Mode kModes[4] = {sy::Mode::Self, sy::Mode::External, sy::Mode::Self, sy::Mode::External};
    static const sy::Lang kLangs[4] = {sy::Lang::Mono, sy::Lang::Mono, sy::Lang::Cross, sy::Lang::Cross};
    Rng base(31);
    std::vector<Tensor> imgs, masks;
    for (int i = 0; i < 200; ++i) {
        Rng rng = base.split(static_cast<std::uint64_t>(i));
        sy::SampleRecord r = sy::compose_sample(rng, kModes[i % 4], kLangs[i % 4]);
        Tensor region = scene_half(r.inpaint_mask);
        auto pred = stgn::eval::ocr_decode(r.scene, region, r.x0, r.y0, static_cast<int>(r.text.size()));
        wrong += stgn::eval::glyphs_to_string(pred) != stgn::eval::truth_string(r.script, r.text);
        total += 1;

        Tensor seg = stgn::eval::threshold_segment(r.scene, region);
        for (int p = 0; p < sy::kScene * sy::kScene; ++p) {
            if (region.data()[p] < 0.5) continue;
            region_px += 1;
            disagree += (seg.data()[p] > 0.5) != (r.text_mask.data()[p] > 0.5);
        }
        if (i < 8) {
            imgs.push_back(r.scene);
            masks.push_back(r.text_mask);
        }
    }
    const double seg_err = disagree / region_px;
    const double self_frechet = stgn::eval::masked_style_distance(imgs, masks, imgs, masks).frechet;
    const bool pass = wrong == 0 && seg_err <= 0.05 && self_frechet <= 1e-6;
    record(9, "metric-sanity", pass,
           "ocr errors " + std::to_string(wrong) + "/" + std::to_string(total) + ", seg disagreement " +
               fmt(seg_err) + ", self frechet " + fmt(self_frechet));
}

// ---------------------------------------------------------------------------

struct TrainedRun {
    std::uint64_t seed;
    double lambda;
    std::string ckpt;
    double train_seconds = 0;
};

stgn::RunConfig base_config(const std::string& work) {
    stgn::RunConfig cfg;
    cfg.seed = 42;
    cfg.data_dir = work + "/train";
    cfg.bench_dir = work + "/bench";
    cfg.out_dir = work + "/out";
    cfg.log_every = 500;
    cfg.ckpt_every = 0;
    return cfg;
}

stgn::eval::BenchReport eval_run(const std::string& work, const std::string& ckpt, int injection) {
    stgn::RunConfig cfg = base_config(work);
    cfg.injection = injection;
    Rng init(cfg.seed);
    stgn::pipeline::Model model(cfg, init);
    stgn::load_checkpoint(ckpt, model.ps);
    return stgn::eval::run_benchmark(stgn::pipeline::model_sampler(model, cfg), cfg.bench_dir, 7,
                                     stgn::config_hash(cfg), ckpt);
}

double ext_frechet(const stgn::eval::BenchReport& rep) {
    double s = 0;
    int n = 0;
    for (const auto& b : rep.settings) {
        if (b.mode == sy::Mode::External) {
            s += b.masked_frechet;
            n += 1;
        }
    }
    return s / n;
}

double ext_sen_acc(const stgn::eval::BenchReport& rep) {
    double s = 0;
    int n = 0;
    for (const auto& b : rep.settings) {
        if (b.mode == sy::Mode::External) {
            s += b.sen_acc;
            n += 1;
        }
    }
    return s / n;
}

double ext_cross_acc(const stgn::eval::BenchReport& rep) {
    for (const auto& b : rep.settings) {
        if (b.mode == sy::Mode::External && b.lang == sy::Lang::Cross) return b.sen_acc;
    }
    return 0;
}

void criterion_5_convergence(const std::string& work, const TrainedRun& cfm_run) {
    stgn::RunConfig cfg = base_config(work);
    cfg.injection = 0;
    Rng init(cfg.seed);
    stgn::pipeline::Model model(cfg, init);
    stgn::load_checkpoint(cfm_run.ckpt, model.ps);
    auto sampler = stgn::pipeline::model_sampler(model, cfg);

    // held-out self-style monolingual split, disjoint rng stream from training
    Rng gen_base(4242);
    Rng eval_base(7);
    double acc = 0;
    for (int i = 0; i < 64; ++i) {
        Rng grng = gen_base.split(static_cast<std::uint64_t>(i));
        sy::SampleRecord r = sy::compose_sample(grng, sy::Mode::Self, sy::Lang::Mono);
        Rng srng = eval_base.split(static_cast<std::uint64_t>(i));
        Tensor canvas = sampler(r, srng);
        Tensor gen_scene = scene_half(canvas);
        Tensor region = scene_half(r.inpaint_mask);
        auto pred = stgn::eval::ocr_decode(gen_scene, region, r.x0, r.y0, static_cast<int>(r.text.size()));
        acc += stgn::eval::glyphs_to_string(pred) == stgn::eval::truth_string(r.script, r.text);
    }
    acc /= 64.0;
    const bool pass = acc >= 0.90 && cfm_run.train_seconds <= 1800.0;
    record(5, "toy-convergence", pass,
           "held-out sen_acc " + fmt(acc) + ", train " + fmt(cfm_run.train_seconds) + " s");
}

void criterion_4_inversion(const std::string& work, const std::string& ckpt) {
    stgn::RunConfig cfg = base_config(work);
    Rng init(cfg.seed);
    stgn::pipeline::Model model(cfg, init);
    stgn::load_checkpoint(ckpt, model.ps);
    stgn::NoGradGuard ng;

    auto entries = sy::read_manifest(cfg.bench_dir + "/manifest.txt");
    sy::SampleRecord r = sy::load_sample(entries[0], cfg.bench_dir);
    stgn::ConditioningSet cond = reference_conditioning(r);
    stgn::StyleEmbedding style = model.enc.encode(cond.style_img);

    const int n = 50;
    const double dt = 1.0 / n;
    // forward leg: the inversion integration toward noise
    Tensor x = cond.concat_input;
    for (int k = 0; k < n; ++k) {
        Tensor v = model.dit.forward_velocity(x, k * dt, cond, style);
        x = op::add(x, op::scale(v, dt));
    }
    // backward leg: the sampler's grid, uncomposited so the round trip is pure
    for (int s = 0; s < n; ++s) {
        Tensor v = model.dit.forward_velocity(x, 1.0 - static_cast<double>(s) / n, cond, style);
        x = op::sub(x, op::scale(v, dt));
    }
    double mse = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = x.data()[i] - cond.concat_input.data()[i];
        mse += d * d;
    }
    mse /= static_cast<double>(x.size());
    record(4, "inversion-round-trip", mse <= 1e-2, "reconstruction mse " + fmt(mse) + " at 50 steps");
}

void criterion_10_determinism(const std::string& work, const std::string& bin) {
    const std::string det = work + "/det";
    fs::create_directories(det);
    {
        std::ofstream f(det + "/cfg.txt");
        f << "seed = 9\ndata_dir = " << det << "/train\nbench_dir = " << det << "/bench\nout_dir = " << det
          << "/out\n";
    }
    auto run = [&](const std::string& args) {
        const std::string cmd = bin + " " + args + " --config " + det + "/cfg.txt > /dev/null 2>&1";
        return std::system(cmd.c_str()) == 0;
    };
    bool ran = true, same = true;
    auto pass_cmd = [&](const std::string& args, const std::vector<std::string>& artifacts) {
        ran = ran && run(args);
        std::vector<std::string> first;
        for (const auto& a : artifacts) first.push_back(slurp(a));
        ran = ran && run(args);
        for (std::size_t i = 0; i < artifacts.size(); ++i) same = same && first[i] == slurp(artifacts[i]);
    };
    pass_cmd("gen-data --n_samples 8", {det + "/train/manifest.txt", det + "/train/s0000_scene.ppm"});
    pass_cmd("gen-data --split_kind bench --n_samples 8",
             {det + "/bench/manifest.txt", det + "/bench/s0003_ref.ppm"});
    pass_cmd("train --steps 3", {det + "/out/model.ckpt"});
    pass_cmd("sample --checkpoint " + det + "/out/model.ckpt --num_steps 10 --sample_count 2",
             {det + "/out/sample_0000.ppm", det + "/out/sample_0001.ppm"});
    pass_cmd("eval --checkpoint " + det + "/out/model.ckpt --num_steps 10 --report_path " + det + "/rep.txt",
             {det + "/rep.txt"});
    record(10, "determinism", ran && same,
           std::string("commands ") + (ran ? "ok" : "FAILED") + ", artifacts " +
               (same ? "byte-identical" : "DIFFER"));
}

}  // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: acceptance <path-to-stgn-binary>\n";
        return 2;
    }
    const std::string bin = argv[1];
    const std::string work = (fs::temp_directory_path() / "stgn_acceptance").string();
    std::error_code ec;
    fs::remove_all(work, ec);
    fs::create_directories(work);

    try {
        criterion_1_gradients();
        criterion_2_identities();
        criterion_3_adain_moments();
        criterion_9_metric_sanity();

        // shared data + encoder for the training-based criteria
        std::fprintf(stderr, "[acceptance] %.0f s: generating splits + pretraining encoder\n", now_s());
        {
            stgn::RunConfig cfg = base_config(work);
            cfg.split_kind = "train";
            cfg.n_samples = 512;
            stgn::pipeline::cmd_gen_data(cfg);
            cfg.split_kind = "bench";
            cfg.n_samples = 64;
            stgn::pipeline::cmd_gen_data(cfg);
            cfg = base_config(work);
            cfg.out_dir = work + "/enc";
            stgn::pipeline::cmd_pretrain_encoder(cfg);
        }

        std::vector<TrainedRun> runs;
        for (std::uint64_t seed : {42ull, 43ull, 44ull}) {
            for (double lambda : {0.0, 10.0}) {
                TrainedRun tr;
                tr.seed = seed;
                tr.lambda = lambda;
                stgn::RunConfig cfg = base_config(work);
                cfg.seed = seed;
                cfg.lambda_tsc = lambda;
                cfg.encoder_checkpoint = work + "/enc/encoder.ckpt";
                cfg.out_dir = work + "/run_s" + std::to_string(seed) + "_l" + fmt(lambda);
                std::fprintf(stderr, "[acceptance] %.0f s: training seed %llu lambda %g\n", now_s(),
                             static_cast<unsigned long long>(seed), lambda);
                const double t0 = now_s();
                stgn::pipeline::cmd_train(cfg);
                tr.train_seconds = now_s() - t0;
                tr.ckpt = cfg.out_dir + "/model.ckpt";
                runs.push_back(tr);
            }
        }
        auto find_run = [&](std::uint64_t seed, double lambda) -> const TrainedRun& {
            for (const auto& r : runs) {
                if (r.seed == seed && r.lambda == lambda) return r;
            }
            throw std::runtime_error("missing run");
        };

        criterion_5_convergence(work, find_run(42, 0.0));
        criterion_4_inversion(work, find_run(42, 10.0).ckpt);

        std::vector<double> fr_l0, fr_l10, fr_l10_off, acc_on, acc_off, cross_acc;
        for (std::uint64_t seed : {42ull, 43ull, 44ull}) {
            std::fprintf(stderr, "[acceptance] %.0f s: evaluating seed %llu\n", now_s(),
                         static_cast<unsigned long long>(seed));
            auto rep_l0 = eval_run(work, find_run(seed, 0.0).ckpt, 1);
            auto rep_on = eval_run(work, find_run(seed, 10.0).ckpt, 1);
            auto rep_off = eval_run(work, find_run(seed, 10.0).ckpt, 0);
            fr_l0.push_back(ext_frechet(rep_l0));
            fr_l10.push_back(ext_frechet(rep_on));
            fr_l10_off.push_back(ext_frechet(rep_off));
            acc_on.push_back(ext_sen_acc(rep_on));
            acc_off.push_back(ext_sen_acc(rep_off));
            cross_acc.push_back(ext_cross_acc(rep_on));
        }

        {
            const double m10 = median3(fr_l10), m0 = median3(fr_l0);
            record(6, "tsc-ablation", m10 <= 0.95 * m0,
                   "external frechet median lambda10 " + fmt(m10) + " vs lambda0 " + fmt(m0));
        }
        {
            const double mon = median3(fr_l10), moff = median3(fr_l10_off);
            const double aon = median3(acc_on), aoff = median3(acc_off);
            record(7, "injection-ablation", mon <= 0.97 * moff && aon >= aoff - 0.05,
                   "external frechet median gated " + fmt(mon) + " vs ungated " + fmt(moff) + ", sen_acc " +
                       fmt(aon) + " vs " + fmt(aoff));
        }
        {
            const double mc = median3(cross_acc);
            record(8, "cross-lingual", mc >= 0.80, "external_cross sen_acc median " + fmt(mc));
        }

        criterion_10_determinism(work, bin);
    } catch (const std::exception& e) {
        std::cerr << "acceptance: aborted by exception: " << e.what() << "\n";
        return 2;
    }

    std::sort(g_results.begin(), g_results.end(),
              [](const Criterion& a, const Criterion& b) { return a.id < b.id; });
    bool all = true;
    for (const auto& c : g_results) {
        std::printf("criterion %2d %-28s %s  %s\n", c.id, c.name.c_str(), c.pass ? "PASS" : "FAIL",
                    c.detail.c_str());
        all = all && c.pass;
    }
    std::printf("acceptance: %s\n", all ? "ALL CRITERIA PASSED" : "FAILURES PRESENT");
    return all ? 0 : 1;
}
