#pragma once

// Flat key = value run configuration: file parsing, CLI overrides, canonical
// serialization, and the FNV-1a hash stamped into every artifact.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace stgn {

struct RunConfig {
    std::uint64_t seed = 0;

    // paths
    std::string data_dir = "data/train";
    std::string bench_dir = "data/bench";
    std::string out_dir = "out";
    std::string encoder_checkpoint;
    std::string checkpoint;

    // data generation
    std::string split_kind = "train";  // train | bench
    int n_samples = 512;

    // model
    int depth = 4;
    int canvas_h = 64;
    int canvas_w = 32;

    // training; lr 1e-3 suits the from-scratch toy model (full-scale
    // reference: 2e-5, batch 2, 16-step accumulation)
    double lr = 1e-3;
    int batch = 4;
    int accum = 1;
    int steps = 3000;
    int pretrain_steps = 2000;
    double lambda_tsc = 10.0;
    int log_every = 50;
    int ckpt_every = 500;

    // sampling / evaluation
    int num_steps = 50;
    int gate_steps = 10;
    int injection = 1;
    int sample_count = 4;
    std::string report_path;
};

// Throws ConfigError on unknown keys or unparseable values.
void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value);

// Parses a flat key = value file ('#' comments, blank lines allowed), then
// applies the overrides in order.
RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

// Every key in fixed order, one per line; input to the hash.
std::string config_canonical(const RunConfig& cfg);

// 16 hex digits, FNV-1a 64 over the canonical form.
std::string config_hash(const RunConfig& cfg);

void write_config(const RunConfig& cfg, const std::string& path);

}  // namespace stgn
