#include "stgn/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "stgn/checkpoint.hpp"
#include "stgn/error.hpp"
#include "stgn/gradcheck.hpp"
#include "stgn/optim.hpp"
#include "stgn/pnm.hpp"
#include "stgn/style_loss.hpp"
#include "stgn/synthdata.hpp"

namespace stgn::pipeline {

namespace op = stgn::ops;
namespace sy = stgn::synth;

namespace {

std::vector<sy::SampleRecord> load_split(const std::string& dir) {
    std::vector<sy::SampleRecord> out;
    for (const auto& e : sy::read_manifest(dir + "/manifest.txt")) out.push_back(sy::load_sample(e, dir));
    if (out.empty()) throw IoError("empty split in " + dir);
    return out;
}

ConditioningSet target_conditioning(const sy::SampleRecord& r) {
    ConditioningSet c;
    c.concat_input = r.concat;
    c.inpaint_mask = r.inpaint_mask;
    c.target_text = eval::truth_string(r.script, r.text);
    c.style_img = r.style_ref;
    return c;
}

ConditioningSet reference_conditioning(const sy::SampleRecord& r) {
    Tensor plain = sy::rasterize_text(r.ref_text, r.ref_script, 1, r.ref_x0, r.ref_y0);
    Tensor glyph = Tensor::full({sy::kScene, sy::kScene}, 1.0);
    for (std::size_t i = 0; i < plain.size(); ++i) {
        if (plain.data()[i] > 0.5) glyph.raw()[i] = 0.0;
    }
    ConditioningSet c;
    c.concat_input = sy::concat_glyph_scene(glyph, r.style_ref);
    c.inpaint_mask = sy::text_region_mask(r.style_ref_mask);
    c.target_text = eval::truth_string(r.ref_script, r.ref_text);
    c.style_img = r.style_ref;
    return c;
}

// Scene half of a [2H x W x 3] canvas as [H x W x 3], graph-preserving.
Tensor scene_half(const Tensor& canvas) {
    const int h = canvas.dim(0) / 2, w = canvas.dim(1);
    Tensor flat = op::reshape(canvas, {2 * h, w * 3});
    return op::reshape(op::slice_axis0(flat, h, 2 * h), {h, w, 3});
}

// pixel mask [H x W] lifted to [H x W x 3]
Tensor expand3(const Tensor& m) {
    const int n = m.dim(0) * m.dim(1);
    Tensor flat = op::mul_colvec(Tensor::full({n, 3}, 1.0), op::reshape(m, {n}));
    return op::reshape(flat, {m.dim(0), m.dim(1), 3});
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory " + dir);
}

struct StepLoss {
    double cfm = 0, tsc = 0, total = 0;
};

}  // namespace

eval::Sampler model_sampler(const Model& model, const RunConfig& cfg) {
    const flow::FlowSchedule sched = flow::FlowSchedule::linear(cfg.num_steps);
    injection::InjectionConfig inj;
    inj.gate_steps = cfg.gate_steps;
    inj.enabled = cfg.injection != 0;
    const Denoiser* dit = &model.dit;
    const StyleEncoder* enc = &model.enc;
    return [dit, enc, sched, inj](const sy::SampleRecord& r, Rng& rng) {
        ConditioningSet cond = target_conditioning(r);
        ConditioningSet ref_cond = reference_conditioning(r);
        Tensor m_style_pix = sy::text_region_mask(r.style_ref_mask);
        return injection::styled_sample(*dit, *enc, cond, ref_cond, m_style_pix, sched, inj, rng);
    };
}

void cmd_gen_data(const RunConfig& cfg) {
    const std::string dir = cfg.split_kind == "bench" ? cfg.bench_dir : cfg.data_dir;
    const std::string manifest = sy::make_split(dir, cfg.split_kind, cfg.n_samples, cfg.seed);
    write_config(cfg, dir + "/config.txt");
    std::cout << "gen-data config_hash " << config_hash(cfg) << " wrote " << cfg.n_samples << " samples to "
              << manifest << "\n";
}

void cmd_pretrain_encoder(const RunConfig& cfg) {
    auto data = load_split(cfg.data_dir);
    ensure_dir(cfg.out_dir);
    Rng rng(cfg.seed);
    ParamStore ps;
    StyleEncoder enc(ps, rng);

    // segmentation pretraining touches E_text and the decoder head only
    for (auto& e : ps.entries()) {
        const bool on = e.name.rfind("enc.text.e.", 0) == 0 || e.name.rfind("enc.seg.", 0) == 0;
        e.tensor.set_requires_grad(on);
    }
    AdamW opt(ps, {.lr = cfg.lr});

    const std::string hash = config_hash(cfg);
    for (int step = 1; step <= cfg.pretrain_steps; ++step) {
        Tensor loss = Tensor::scalar(0.0);
        for (int b = 0; b < cfg.batch; ++b) {
            const auto& r = data[rng.next_u64() % data.size()];
            loss = op::add(loss, enc.segmentation_pretrain_loss(r.scene, r.text_mask));
        }
        loss = op::scale(loss, 1.0 / cfg.batch);
        if (!std::isfinite(loss.value())) {
            throw NumericError("pretrain-encoder: non-finite loss at step " + std::to_string(step));
        }
        loss.backward();
        opt.step();
        ps.zero_grad();
        if (step == 1 || step % cfg.log_every == 0) {
            std::cout << "pretrain step " << step << " seg_loss " << loss.value() << "\n";
        }
    }

    CheckpointMeta meta;
    meta.config_hash = hash;
    meta.step = static_cast<std::uint64_t>(cfg.pretrain_steps);
    meta.rng = rng.state();
    save_checkpoint(cfg.out_dir + "/encoder.ckpt", ps, meta);
    std::cout << "pretrain-encoder config_hash " << hash << " saved " << cfg.out_dir << "/encoder.ckpt\n";
}

void cmd_train(const RunConfig& cfg) {
    auto data = load_split(cfg.data_dir);
    ensure_dir(cfg.out_dir);
    Rng rng(cfg.seed);
    Model model(cfg, rng);

    if (!cfg.encoder_checkpoint.empty()) {
        load_checkpoint(cfg.encoder_checkpoint, model.ps);
        for (auto& e : model.ps.entries()) e.tensor.set_requires_grad(true);
        StyleEncoder::freeze_backbones(model.ps);
    }
    // The clean-image head divides by sigma(t), so small-t samples can spike
    // the gradient an order of magnitude above typical; a global-norm clip
    // keeps those draws from knocking the optimizer state around.
    AdamW opt(model.ps, {.lr = cfg.lr, .clip_norm = 0.5});

    std::uint64_t start_step = 0;
    if (!cfg.checkpoint.empty()) {  // resume
        CheckpointMeta m = load_checkpoint(cfg.checkpoint, model.ps, &opt);
        rng = Rng::from_state(m.rng);
        start_step = m.step;
    }

    const flow::FlowSchedule sched = flow::FlowSchedule::linear(cfg.num_steps);
    const std::string hash = config_hash(cfg);
    for (std::uint64_t step = start_step + 1; step <= static_cast<std::uint64_t>(cfg.steps); ++step) {
        StepLoss log;
        for (int micro = 0; micro < cfg.accum; ++micro) {
            Tensor l_cfm = Tensor::scalar(0.0);
            Tensor l_tsc = Tensor::scalar(0.0);
            for (int b = 0; b < cfg.batch; ++b) {
                const auto& r = data[rng.next_u64() % data.size()];
                const double t = rng.uniform();
                Tensor eps = Tensor::randn(r.concat.shape(), rng);
                flow::FlowState state = flow::interpolate(r.concat, eps, t);

                // The sampler resets pixels outside the inpainting mask to the
                // known input after every step, so the denoiser must be trained
                // on that same composited state or inference drifts off the
                // training distribution.
                Tensor keep = expand3(r.inpaint_mask);
                Tensor hold_mask = op::add_scalar(op::neg(keep), 1.0);
                Tensor xt_in = op::add(op::mul(state.xt, keep), op::mul(r.concat, hold_mask));

                ConditioningSet cond = target_conditioning(r);
                StyleEmbedding style = model.enc.encode(cond.style_img);
                Tensor v = model.dit.forward_velocity(xt_in, t, cond, style);
                // Outside the generated region the sampler overwrites the
                // state, and the target there depends on the unpredictable
                // noise draw; substituting the exact target restricts the loss
                // (and its gradient noise) to the region that matters.
                Tensor v_eff = op::add(op::mul(v, keep), op::mul(op::sub(eps, r.concat), hold_mask));
                l_cfm = op::add(l_cfm, flow::cfm_loss(v_eff, state, sched));

                Tensor x0_hat = flow::predict_clean(xt_in, v, t);
                l_tsc = op::add(l_tsc, style_loss::tsc_loss(scene_half(x0_hat), r.text_mask, r.style_ref,
                                                            r.style_ref_mask));
            }
            l_cfm = op::scale(l_cfm, 1.0 / cfg.batch);
            l_tsc = op::scale(l_tsc, 1.0 / cfg.batch);
            style_loss::LossReport rep = style_loss::total_loss(l_cfm, l_tsc, cfg.lambda_tsc);
            if (!std::isfinite(rep.total.value())) {
                throw NumericError("train: non-finite loss at step " + std::to_string(step) + " (l_cfm " +
                                   std::to_string(rep.l_cfm.value()) + ", l_tsc " +
                                   std::to_string(rep.l_tsc.value()) + ")");
            }
            op::scale(rep.total, 1.0 / cfg.accum).backward();
            log.cfm += rep.l_cfm.value() / cfg.accum;
            log.tsc += rep.l_tsc.value() / cfg.accum;
            log.total += rep.total.value() / cfg.accum;
        }
        opt.step();
        model.ps.zero_grad();

        if (step == 1 || step % static_cast<std::uint64_t>(cfg.log_every) == 0) {
            std::cout << "train step " << step << " l_cfm " << log.cfm << " l_tsc " << log.tsc << " lambda_tsc "
                      << cfg.lambda_tsc << " total " << log.total << "\n";
        }
        if (cfg.ckpt_every > 0 && step % static_cast<std::uint64_t>(cfg.ckpt_every) == 0) {
            CheckpointMeta meta;
            meta.config_hash = hash;
            meta.step = step;
            meta.rng = rng.state();
            save_checkpoint(cfg.out_dir + "/model.ckpt", model.ps, meta, &opt);
        }
    }

    CheckpointMeta meta;
    meta.config_hash = hash;
    meta.step = static_cast<std::uint64_t>(cfg.steps);
    meta.rng = rng.state();
    save_checkpoint(cfg.out_dir + "/model.ckpt", model.ps, meta, &opt);
    std::cout << "train config_hash " << hash << " saved " << cfg.out_dir << "/model.ckpt\n";
}

void cmd_sample(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("sample: checkpoint is required");
    ensure_dir(cfg.out_dir);
    Rng init(cfg.seed);
    Model model(cfg, init);
    load_checkpoint(cfg.checkpoint, model.ps);

    auto entries = sy::read_manifest(cfg.bench_dir + "/manifest.txt");
    eval::Sampler sampler = model_sampler(model, cfg);
    Rng base(cfg.seed);
    const int n = std::min<int>(cfg.sample_count, static_cast<int>(entries.size()));
    for (int i = 0; i < n; ++i) {
        sy::SampleRecord r = sy::load_sample(entries[static_cast<std::size_t>(i)], cfg.bench_dir);
        Rng rng = base.split(static_cast<std::uint64_t>(entries[static_cast<std::size_t>(i)].id));
        Tensor canvas = sampler(r, rng);
        char name[32];
        std::snprintf(name, sizeof(name), "/sample_%04d.ppm", entries[static_cast<std::size_t>(i)].id);
        Tensor scene = scene_half(canvas);
        for (auto& v : scene.raw()) v = std::clamp(v, 0.0, 1.0);
        write_ppm(cfg.out_dir + name, scene);
        std::cout << "sample wrote " << cfg.out_dir + name << "\n";
    }
    std::cout << "sample config_hash " << config_hash(cfg) << " count " << n << "\n";
}

void cmd_eval(const RunConfig& cfg) {
    if (cfg.checkpoint.empty()) throw ConfigError("eval: checkpoint is required");
    ensure_dir(cfg.out_dir);
    Rng init(cfg.seed);
    Model model(cfg, init);
    CheckpointMeta meta = load_checkpoint(cfg.checkpoint, model.ps);

    eval::BenchReport rep = eval::run_benchmark(model_sampler(model, cfg), cfg.bench_dir, cfg.seed,
                                                config_hash(cfg), cfg.checkpoint + "@" + std::to_string(meta.step));
    const std::string path = cfg.report_path.empty() ? cfg.out_dir + "/report.txt" : cfg.report_path;
    eval::write_report(rep, path);
    for (const auto& s : rep.settings) {
        std::cout << "eval " << (s.mode == sy::Mode::Self ? "self" : "external") << "_"
                  << (s.lang == sy::Lang::Mono ? "mono" : "cross") << " n " << s.n << " sen_acc " << s.sen_acc
                  << " ned " << s.ned << " masked_frechet_proxy " << s.masked_frechet << " masked_feat_dist_proxy "
                  << s.masked_feat_dist << "\n";
    }
    std::cout << "eval config_hash " << rep.config_hash << " wrote " << path << "\n";
}

namespace {

Tensor rand_unit(const Shape& shape, Rng& rng) {
    Tensor t = Tensor::zeros(shape);
    for (auto& v : t.raw()) v = rng.uniform() - 0.5;
    return t;
}

double check_fn(const std::function<Tensor(const Tensor&)>& f, const Shape& shape, Rng& rng) {
    return grad_check(f, rand_unit(shape, rng));
}

}  // namespace

std::vector<GradCheckRow> gradcheck_suite() {
    std::vector<GradCheckRow> rows;
    Rng rng(2024);

    {
        Tensor probe = rand_unit({5, 6}, rng);
        rows.push_back({"attention", check_fn(
                                         [&](const Tensor& t) {
                                             Tensor q = op::slice_axis0(t, 0, 5);
                                             Tensor k = op::slice_axis0(t, 5, 12);
                                             Tensor v = op::slice_axis0(t, 12, 19);
                                             return op::mean(op::mul(op::mha(q, k, v, 2), probe));
                                         },
                                         {19, 6}, rng)});
    }
    {
        Tensor probe = rand_unit({6, 3}, rng);
        rows.push_back({"adain", check_fn(
                                     [&](const Tensor& t) {
                                         Tensor x = op::slice_axis0(t, 0, 6);
                                         Tensor ref = op::slice_axis0(t, 6, 14);
                                         Tensor m = Tensor::from({8}, {1, 1, 0, 1, 1, 1, 0, 1});
                                         return op::mean(op::mul(op::adain(x, ref, m), probe));
                                     },
                                     {14, 3}, rng)});
    }
    {
        Tensor probe = rand_unit({4, 4}, rng);
        rows.push_back({"gram_matrix",
                        check_fn([&](const Tensor& t) { return op::mean(op::mul(op::gram_matrix(t), probe)); },
                                 {4, 9}, rng)});
    }
    {
        Tensor probe = rand_unit({5, 6}, rng);
        rows.push_back({"layer_norm", check_fn(
                                          [&](const Tensor& t) {
                                              Tensor x = op::slice_axis0(t, 0, 5);
                                              Tensor g = op::reshape(op::slice_axis0(t, 5, 6), {6});
                                              Tensor b = op::reshape(op::slice_axis0(t, 6, 7), {6});
                                              return op::mean(op::mul(op::layer_norm(x, g, b), probe));
                                          },
                                          {7, 6}, rng)});
    }
    {
        Tensor w = rand_unit({4, 3, 3, 3}, rng);
        Tensor b = rand_unit({4}, rng);
        rows.push_back({"conv2d", check_fn(
                                      [&](const Tensor& t) {
                                          return op::mean(op::relu(op::conv2d(t, w, b, 2, 1)));
                                      },
                                      {6, 6, 3}, rng)});
    }
    {
        Tensor m_gen = Tensor::zeros({8, 8});
        Tensor m_ref = Tensor::zeros({8, 8});
        Rng mr(7);
        for (auto& v : m_gen.raw()) v = mr.uniform() > 0.5 ? 1.0 : 0.0;
        for (auto& v : m_ref.raw()) v = mr.uniform() > 0.5 ? 1.0 : 0.0;
        rows.push_back({"tsc_loss", check_fn(
                                        [&](const Tensor& t) {
                                            Tensor flat = op::reshape(t, {128, 3});
                                            Tensor gen = op::reshape(op::slice_axis0(flat, 0, 64), {8, 8, 3});
                                            Tensor ref = op::reshape(op::slice_axis0(flat, 64, 128), {8, 8, 3});
                                            return style_loss::tsc_loss(gen, m_gen, ref, m_ref);
                                        },
                                        {128, 3}, rng)});
    }
    {
        Tensor x0 = rand_unit({4, 4, 3}, rng);
        Tensor eps = rand_unit({4, 4, 3}, rng);
        flow::FlowState state = flow::interpolate(x0, eps, 0.37);
        flow::FlowSchedule sched = flow::FlowSchedule::linear(8);
        rows.push_back({"cfm_loss",
                        check_fn([&](const Tensor& v) { return flow::cfm_loss(v, state, sched); }, {4, 4, 3}, rng)});
    }
    {
        ParamStore ps;
        Rng mr(11);
        Denoiser dit(ps, mr, 2, 8, 8);
        for (auto& e : ps.entries()) {  // style_out starts at zero; randomize so its path is live
            if (e.name.find("style_out") != std::string::npos) {
                for (auto& v : e.tensor.raw()) v = mr.uniform() * 0.1 - 0.05;
            }
        }
        ConditioningSet cond;
        cond.concat_input = rand_unit({8, 8, 3}, mr);
        cond.inpaint_mask = Tensor::zeros({8, 8});
        for (int p = 20; p < 44; ++p) cond.inpaint_mask.raw()[p] = 1.0;
        StyleEmbedding style;
        style.k_s = rand_unit({8, 64}, mr);
        style.v_s = rand_unit({8, 64}, mr);
        Tensor probe = rand_unit({8, 8, 3}, rng);
        rows.push_back({"denoiser_2block",
                        check_fn(
                            [&](const Tensor& xt) {
                                Tensor v = dit.forward_velocity(xt, 0.42, cond, style);
                                return op::mean(op::mul(v, probe));
                            },
                            {8, 8, 3}, rng)});
    }
    return rows;
}

bool cmd_gradcheck(const RunConfig& cfg) {
    (void)cfg;
    bool ok = true;
    for (const auto& row : gradcheck_suite()) {
        const bool pass = row.max_err < 1e-4;
        ok = ok && pass;
        std::printf("gradcheck %-16s max_rel_err %.3e %s\n", row.name.c_str(), row.max_err,
                    pass ? "pass" : "FAIL");
    }
    std::cout << (ok ? "gradcheck: all passed" : "gradcheck: FAILURES") << "\n";
    return ok;
}

}  // namespace stgn::pipeline
