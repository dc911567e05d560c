#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "stgn/checkpoint.hpp"
#include "stgn/config.hpp"
#include "stgn/optim.hpp"
#include "stgn/ops.hpp"
#include "stgn/pipeline.hpp"
#include "stgn/style_encoder.hpp"

using namespace stgn;
namespace fs = std::filesystem;
namespace op = stgn::ops;

namespace {

std::string bin() {
    const char* p = std::getenv("STGN_BIN");
    REQUIRE(p != nullptr);
    return p;
}

int run(const std::string& args, const std::string& out_file = "/dev/null") {
    const std::string cmd = bin() + " " + args + " > " + out_file + " 2>&1";
    const int rc = std::system(cmd.c_str());
    return WEXITSTATUS(rc);
}

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f.good());
    return std::string(std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>());
}

struct Workspace {
    std::string dir;
    std::string cfg;
    explicit Workspace(const std::string& name) {
        dir = fs::temp_directory_path() / name;
        fs::remove_all(dir);
        fs::create_directories(dir);
        cfg = dir + "/cfg.txt";
        std::ofstream f(cfg);
        f << "seed = 11\n";
        f << "data_dir = " << dir << "/train\n";
        f << "bench_dir = " << dir << "/bench\n";
        f << "out_dir = " << dir << "/out\n";
    }
    ~Workspace() { fs::remove_all(dir); }
};

}  // namespace

TEST_CASE("usage errors exit 1, runtime errors exit 2") {
    Workspace w("stgn_cli_usage");
    CHECK(run("") == 1);
    CHECK(run("frobnicate --config " + w.cfg) == 1);
    CHECK(run("gen-data") == 1);
    CHECK(run("gen-data --config " + w.cfg + " --no_such_key 3") == 1);
    CHECK(run("gen-data --config " + w.dir + "/missing.txt") == 2);
    CHECK(run("eval --config " + w.cfg) == 1);  // checkpoint required
    // unwritable data dir: path component is a regular file
    CHECK(run("gen-data --config " + w.cfg + " --data_dir " + w.cfg + "/x --n_samples 4") == 2);
}

TEST_CASE("gen-data: counts and byte-identical reruns") {
    Workspace w("stgn_cli_gen");
    REQUIRE(run("gen-data --config " + w.cfg + " --n_samples 8") == 0);
    std::ifstream mf(w.dir + "/train/manifest.txt");
    int lines = 0;
    std::string line;
    while (std::getline(mf, line)) lines += !line.empty();
    CHECK(lines == 8);

    const std::string before = slurp(w.dir + "/train/manifest.txt");
    REQUIRE(run("gen-data --config " + w.cfg + " --data_dir " + w.dir + "/train2 --n_samples 8") == 0);
    CHECK(slurp(w.dir + "/train2/manifest.txt") == before);
    CHECK(slurp(w.dir + "/train/s0003_scene.ppm") == slurp(w.dir + "/train2/s0003_scene.ppm"));
}

TEST_CASE("pretrain-encoder: loss trends down, visual backbone untouched") {
    Workspace w("stgn_cli_pre");
    REQUIRE(run("gen-data --config " + w.cfg + " --n_samples 16") == 0);
    REQUIRE(run("pretrain-encoder --config " + w.cfg + " --pretrain_steps 50 --batch 2 --log_every 1",
                w.dir + "/pre.log") == 0);

    std::ifstream log(w.dir + "/pre.log");
    std::vector<double> losses;
    std::string tok;
    while (log >> tok) {
        if (tok == "seg_loss") {
            double v;
            log >> v;
            losses.push_back(v);
        }
    }
    REQUIRE(losses.size() == 50);
    // 5-step smoothed trend decreases across the run
    auto block = [&](std::size_t a) {
        double s = 0;
        for (std::size_t i = a; i < a + 5; ++i) s += losses[i];
        return s / 5;
    };
    CHECK(block(45) < block(0));
    for (std::size_t a = 0; a + 15 <= 50; a += 10) CHECK(block(a + 10) < block(a));

    // the visual branch never receives segmentation gradients
    ParamStore loaded;
    load_checkpoint(w.dir + "/out/encoder.ckpt", loaded);
    Rng rng(11);
    ParamStore fresh;
    StyleEncoder enc(fresh, rng);
    bool compared = false;
    for (const auto& e : fresh.entries()) {
        if (e.name.rfind("enc.vis.e.", 0) != 0) continue;
        const auto& got = loaded.get(e.name);
        REQUIRE(got.size() == e.tensor.size());
        for (std::size_t i = 0; i < e.tensor.size(); ++i) CHECK(got.data()[i] == e.tensor.data()[i]);
        compared = true;
    }
    CHECK(compared);
}

TEST_CASE("sample: writes P6 images deterministically") {
    Workspace w("stgn_cli_sample");
    REQUIRE(run("gen-data --config " + w.cfg + " --n_samples 8") == 0);
    REQUIRE(run("gen-data --config " + w.cfg + " --split_kind bench --n_samples 8") == 0);
    REQUIRE(run("train --config " + w.cfg + " --steps 2 --batch 1 --ckpt_every 0") == 0);
    const std::string ckpt = w.dir + "/out/model.ckpt";
    REQUIRE(run("sample --config " + w.cfg + " --checkpoint " + ckpt + " --sample_count 1 --num_steps 10") == 0);
    const std::string img = slurp(w.dir + "/out/sample_0000.ppm");
    CHECK(img.substr(0, 2) == "P6");
    REQUIRE(run("sample --config " + w.cfg + " --checkpoint " + ckpt + " --sample_count 1 --num_steps 10 --out_dir " +
                w.dir + "/out2") == 0);
    CHECK(slurp(w.dir + "/out2/sample_0000.ppm") == img);
}

TEST_CASE("train: checkpoint resume reproduces an uninterrupted run bit-exactly") {
    Workspace w("stgn_cli_resume");
    REQUIRE(run("gen-data --config " + w.cfg + " --n_samples 8") == 0);
    const std::string common = " --batch 1 --ckpt_every 0 --log_every 100";
    REQUIRE(run("train --config " + w.cfg + common + " --steps 3 --out_dir " + w.dir + "/a") == 0);
    REQUIRE(run("train --config " + w.cfg + common + " --steps 6 --out_dir " + w.dir + "/b --checkpoint " + w.dir +
                "/a/model.ckpt") == 0);
    REQUIRE(run("train --config " + w.cfg + common + " --steps 6 --out_dir " + w.dir + "/c") == 0);

    RunConfig cfg;
    Rng r1(11), r2(11);
    pipeline::Model m1(cfg, r1), m2(cfg, r2);
    AdamW o1(m1.ps, {}), o2(m2.ps, {});
    CheckpointMeta meta1 = load_checkpoint(w.dir + "/b/model.ckpt", m1.ps, &o1);
    CheckpointMeta meta2 = load_checkpoint(w.dir + "/c/model.ckpt", m2.ps, &o2);
    CHECK(meta1.step == 6);
    CHECK(meta2.step == 6);
    CHECK(meta1.rng.s[0] == meta2.rng.s[0]);
    REQUIRE(m1.ps.entries().size() == m2.ps.entries().size());
    for (std::size_t i = 0; i < m1.ps.entries().size(); ++i) {
        const auto& a = m1.ps.entries()[i].tensor;
        const auto& b = m2.ps.entries()[i].tensor;
        for (std::size_t j = 0; j < a.size(); ++j) CHECK(a.data()[j] == b.data()[j]);
    }
    for (std::size_t i = 0; i < o1.slots().size(); ++i) {
        for (std::size_t j = 0; j < o1.slots()[i].m.size(); ++j) {
            CHECK(o1.slots()[i].m[j] == o2.slots()[i].m[j]);
            CHECK(o1.slots()[i].v[j] == o2.slots()[i].v[j]);
        }
    }
}

TEST_CASE("config: parsing, overrides, unknown keys, stable hash") {
    Workspace w("stgn_cli_cfg");
    {
        std::ofstream f(w.dir + "/c2.txt");
        f << "# comment line\n\n lambda_tsc = 2.5  # trailing comment\nsteps=7\n";
    }
    RunConfig cfg = load_config(w.dir + "/c2.txt");
    CHECK(cfg.lambda_tsc == 2.5);
    CHECK(cfg.steps == 7);
    RunConfig cfg2 = load_config(w.dir + "/c2.txt", {{"steps", "9"}});
    CHECK(cfg2.steps == 9);

    CHECK_THROWS_AS(apply_kv(cfg, "mystery", "1"), ConfigError);
    CHECK_THROWS_AS(apply_kv(cfg, "steps", "not_a_number"), ConfigError);
    CHECK_THROWS_AS(apply_kv(cfg, "split_kind", "validation"), ConfigError);

    CHECK(config_hash(cfg) != config_hash(cfg2));
    CHECK(config_hash(cfg) == config_hash(load_config(w.dir + "/c2.txt")));
    CHECK(config_hash(cfg).size() == 16);

    write_config(cfg2, w.dir + "/round.txt");
    CHECK(config_hash(load_config(w.dir + "/round.txt")) == config_hash(cfg2));
}

TEST_CASE("optimizer: two steps match an independent reference computation") {
    ParamStore ps;
    Tensor& p = ps.add("w", Tensor::from({2}, {0.5, -0.3}));
    AdamWConfig cfg{.lr = 0.1, .beta1 = 0.9, .beta2 = 0.999, .eps = 1e-8, .weight_decay = 0.01};
    AdamW opt(ps, cfg);

    const std::vector<std::vector<double>> grads = {{0.2, -0.1}, {-0.05, 0.3}};
    std::vector<double> ref = {0.5, -0.3};
    std::vector<double> m(2, 0.0), v(2, 0.0);
    for (int t = 1; t <= 2; ++t) {
        Tensor gdir = Tensor::from({2}, grads[static_cast<std::size_t>(t - 1)]);
        op::sum(op::mul(p, gdir)).backward();
        opt.step();
        ps.zero_grad();
        for (int j = 0; j < 2; ++j) {
            const double g = grads[static_cast<std::size_t>(t - 1)][static_cast<std::size_t>(j)];
            ref[static_cast<std::size_t>(j)] *= 1.0 - cfg.lr * cfg.weight_decay;
            m[static_cast<std::size_t>(j)] = cfg.beta1 * m[static_cast<std::size_t>(j)] + (1 - cfg.beta1) * g;
            v[static_cast<std::size_t>(j)] = cfg.beta2 * v[static_cast<std::size_t>(j)] + (1 - cfg.beta2) * g * g;
            const double mh = m[static_cast<std::size_t>(j)] / (1 - std::pow(cfg.beta1, t));
            const double vh = v[static_cast<std::size_t>(j)] / (1 - std::pow(cfg.beta2, t));
            ref[static_cast<std::size_t>(j)] -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
        }
        for (int j = 0; j < 2; ++j) CHECK(p.data()[j] == doctest::Approx(ref[static_cast<std::size_t>(j)]).epsilon(1e-14));
    }
    CHECK(opt.steps_taken() == 2);
}

TEST_CASE("optimizer: frozen parameters never move") {
    ParamStore ps;
    Tensor& p = ps.add("w", Tensor::from({2}, {1.0, 2.0}));
    ps.freeze_prefix("w");
    AdamW opt(ps, {});
    opt.step();
    CHECK(p.data()[0] == 1.0);
    CHECK(p.data()[1] == 2.0);
}

TEST_CASE("gradient accumulation equals one large-batch gradient") {
    Rng rng(3);
    ParamStore ps;
    Tensor& w = ps.add("w", Tensor::randn({4, 4}, rng, 0.5));
    std::vector<Tensor> xs;
    for (int i = 0; i < 6; ++i) xs.push_back(Tensor::randn({3, 4}, rng));

    // one pass over all six inputs
    Tensor big = Tensor::scalar(0.0);
    for (const auto& x : xs) big = op::add(big, op::mean_sq(op::matmul(x, w)));
    op::scale(big, 1.0 / 6.0).backward();
    std::vector<double> ref = w.grad();
    ps.zero_grad();

    // three accumulated micro-batches of two
    for (int microbatch = 0; microbatch < 3; ++microbatch) {
        Tensor l = Tensor::scalar(0.0);
        for (int b = 0; b < 2; ++b) l = op::add(l, op::mean_sq(op::matmul(xs[static_cast<std::size_t>(microbatch * 2 + b)], w)));
        op::scale(l, 1.0 / 6.0).backward();
    }
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(w.grad()[i] == doctest::Approx(ref[i]).epsilon(1e-10));
}

TEST_CASE("checkpoint: bit-exact round trip with optimizer and rng state") {
    Workspace w("stgn_cli_ckpt");
    Rng rng(21);
    ParamStore a;
    a.add("alpha", Tensor::randn({3, 5}, rng));
    a.add("beta", Tensor::randn({7}, rng));
    a.get("beta").set_requires_grad(false);
    AdamW opt_a(a, {});
    op::sum(op::mul(a.get("alpha"), Tensor::randn({3, 5}, rng))).backward();
    opt_a.step();
    a.zero_grad();

    rng.normal();  // leave a Box-Muller spare in flight
    CheckpointMeta meta;
    meta.config_hash = "cafe0123";
    meta.step = 7;
    meta.rng = rng.state();
    save_checkpoint(w.dir + "/x.ckpt", a, meta, &opt_a);

    ParamStore b;
    b.add("alpha", Tensor::zeros({3, 5}, true));
    b.add("beta", Tensor::zeros({7}, true));
    AdamW opt_b(b, {});
    CheckpointMeta got = load_checkpoint(w.dir + "/x.ckpt", b, &opt_b);
    CHECK(got.config_hash == "cafe0123");
    CHECK(got.step == 7);
    CHECK(got.has_optimizer);
    CHECK(got.rng.seed == meta.rng.seed);
    CHECK(got.rng.spare == meta.rng.spare);
    CHECK(got.rng.has_spare == meta.rng.has_spare);
    for (int i = 0; i < 4; ++i) CHECK(got.rng.s[i] == meta.rng.s[i]);
    for (const auto& e : a.entries()) {
        const auto& other = b.get(e.name);
        CHECK(other.requires_grad() == e.tensor.requires_grad());
        for (std::size_t i = 0; i < e.tensor.size(); ++i) CHECK(other.data()[i] == e.tensor.data()[i]);
    }
    CHECK(opt_b.steps_taken() == 1);
    for (std::size_t i = 0; i < opt_a.slots().size(); ++i) {
        for (std::size_t j = 0; j < opt_a.slots()[i].m.size(); ++j) {
            CHECK(opt_b.slots()[i].m[j] == opt_a.slots()[i].m[j]);
            CHECK(opt_b.slots()[i].v[j] == opt_a.slots()[i].v[j]);
        }
    }

    // loading into an empty store materializes the tensors
    ParamStore c;
    load_checkpoint(w.dir + "/x.ckpt", c);
    CHECK(c.get("alpha").shape() == Shape{3, 5});
    CHECK(c.get("beta").requires_grad() == false);

    // malformed inputs
    {
        std::ofstream f(w.dir + "/bad.ckpt", std::ios::binary);
        f << "NOPE";
    }
    ParamStore d;
    CHECK_THROWS_AS(load_checkpoint(w.dir + "/bad.ckpt", d), IoError);
    ParamStore e2;
    e2.add("alpha", Tensor::zeros({9, 9}));
    CHECK_THROWS_AS(load_checkpoint(w.dir + "/x.ckpt", e2), ConfigError);
}
