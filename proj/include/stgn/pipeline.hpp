#pragma once

// Command drivers: data generation, encoder pretraining, denoiser training,
// sampling, benchmark evaluation, and the gradient verification suite.

#include <string>
#include <vector>

#include "stgn/config.hpp"
#include "stgn/denoiser.hpp"
#include "stgn/evalbench.hpp"
#include "stgn/flow.hpp"
#include "stgn/injection.hpp"
#include "stgn/params.hpp"
#include "stgn/style_encoder.hpp"

namespace stgn::pipeline {

// Encoder + denoiser sharing one parameter store; members initialize in
// declaration order so `enc` and `dit` bind to `ps`.
struct Model {
    ParamStore ps;
    StyleEncoder enc;
    Denoiser dit;

    Model(const RunConfig& cfg, Rng& rng)
        : ps(), enc(ps, rng), dit(ps, rng, cfg.depth, cfg.canvas_h, cfg.canvas_w) {}
};

// Benchmark sampler wrapping styled_sample with the config's schedule and
// injection gate; reference conditioning is rebuilt from manifest metadata.
eval::Sampler model_sampler(const Model& model, const RunConfig& cfg);

void cmd_gen_data(const RunConfig& cfg);
void cmd_pretrain_encoder(const RunConfig& cfg);
void cmd_train(const RunConfig& cfg);
void cmd_sample(const RunConfig& cfg);
void cmd_eval(const RunConfig& cfg);

struct GradCheckRow {
    std::string name;
    double max_err = 0;
};
std::vector<GradCheckRow> gradcheck_suite();

// Prints the pass/fail table; true iff every row is below 1e-4.
bool cmd_gradcheck(const RunConfig& cfg);

}  // namespace stgn::pipeline
