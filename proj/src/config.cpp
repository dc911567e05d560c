#include "stgn/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

#include "stgn/error.hpp"

namespace stgn {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const std::uint64_t r = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
    }
}

int parse_int(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const int r = std::stoi(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": " + v);
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double r = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return r;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": " + v);
    }
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Single key table shared by the parser and the serializer so the two can
// never drift apart.
struct KeyDef {
    const char* name;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyDef>& key_table() {
    static const std::vector<KeyDef> defs = {
        {"seed", [](RunConfig& c, const std::string& v) { c.seed = parse_u64("seed", v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"data_dir", [](RunConfig& c, const std::string& v) { c.data_dir = v; },
         [](const RunConfig& c) { return c.data_dir; }},
        {"bench_dir", [](RunConfig& c, const std::string& v) { c.bench_dir = v; },
         [](const RunConfig& c) { return c.bench_dir; }},
        {"out_dir", [](RunConfig& c, const std::string& v) { c.out_dir = v; },
         [](const RunConfig& c) { return c.out_dir; }},
        {"encoder_checkpoint", [](RunConfig& c, const std::string& v) { c.encoder_checkpoint = v; },
         [](const RunConfig& c) { return c.encoder_checkpoint; }},
        {"checkpoint", [](RunConfig& c, const std::string& v) { c.checkpoint = v; },
         [](const RunConfig& c) { return c.checkpoint; }},
        {"split_kind", [](RunConfig& c, const std::string& v) {
             if (v != "train" && v != "bench") throw ConfigError("config: split_kind must be train or bench");
             c.split_kind = v;
         },
         [](const RunConfig& c) { return c.split_kind; }},
        {"n_samples", [](RunConfig& c, const std::string& v) { c.n_samples = parse_int("n_samples", v); },
         [](const RunConfig& c) { return std::to_string(c.n_samples); }},
        {"depth", [](RunConfig& c, const std::string& v) { c.depth = parse_int("depth", v); },
         [](const RunConfig& c) { return std::to_string(c.depth); }},
        {"canvas_h", [](RunConfig& c, const std::string& v) { c.canvas_h = parse_int("canvas_h", v); },
         [](const RunConfig& c) { return std::to_string(c.canvas_h); }},
        {"canvas_w", [](RunConfig& c, const std::string& v) { c.canvas_w = parse_int("canvas_w", v); },
         [](const RunConfig& c) { return std::to_string(c.canvas_w); }},
        {"lr", [](RunConfig& c, const std::string& v) { c.lr = parse_double("lr", v); },
         [](const RunConfig& c) { return fmt_double(c.lr); }},
        {"batch", [](RunConfig& c, const std::string& v) { c.batch = parse_int("batch", v); },
         [](const RunConfig& c) { return std::to_string(c.batch); }},
        {"accum", [](RunConfig& c, const std::string& v) { c.accum = parse_int("accum", v); },
         [](const RunConfig& c) { return std::to_string(c.accum); }},
        {"steps", [](RunConfig& c, const std::string& v) { c.steps = parse_int("steps", v); },
         [](const RunConfig& c) { return std::to_string(c.steps); }},
        {"pretrain_steps", [](RunConfig& c, const std::string& v) { c.pretrain_steps = parse_int("pretrain_steps", v); },
         [](const RunConfig& c) { return std::to_string(c.pretrain_steps); }},
        {"lambda_tsc", [](RunConfig& c, const std::string& v) { c.lambda_tsc = parse_double("lambda_tsc", v); },
         [](const RunConfig& c) { return fmt_double(c.lambda_tsc); }},
        {"log_every", [](RunConfig& c, const std::string& v) { c.log_every = parse_int("log_every", v); },
         [](const RunConfig& c) { return std::to_string(c.log_every); }},
        {"ckpt_every", [](RunConfig& c, const std::string& v) { c.ckpt_every = parse_int("ckpt_every", v); },
         [](const RunConfig& c) { return std::to_string(c.ckpt_every); }},
        {"num_steps", [](RunConfig& c, const std::string& v) { c.num_steps = parse_int("num_steps", v); },
         [](const RunConfig& c) { return std::to_string(c.num_steps); }},
        {"gate_steps", [](RunConfig& c, const std::string& v) { c.gate_steps = parse_int("gate_steps", v); },
         [](const RunConfig& c) { return std::to_string(c.gate_steps); }},
        {"injection", [](RunConfig& c, const std::string& v) { c.injection = parse_int("injection", v); },
         [](const RunConfig& c) { return std::to_string(c.injection); }},
        {"sample_count", [](RunConfig& c, const std::string& v) { c.sample_count = parse_int("sample_count", v); },
         [](const RunConfig& c) { return std::to_string(c.sample_count); }},
        {"report_path", [](RunConfig& c, const std::string& v) { c.report_path = v; },
         [](const RunConfig& c) { return c.report_path; }},
    };
    return defs;
}

}  // namespace

void apply_kv(RunConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& def : key_table()) {
        if (key == def.name) {
            def.set(cfg, value);
            return;
        }
    }
    throw ConfigError("config: unknown key " + key);
}

RunConfig load_config(const std::string& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    std::ifstream f(path);
    if (!f) throw IoError("config: cannot open " + path);
    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        }
        apply_kv(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    for (const auto& [k, v] : overrides) apply_kv(cfg, k, v);
    return cfg;
}

std::string config_canonical(const RunConfig& cfg) {
    std::ostringstream o;
    for (const auto& def : key_table()) o << def.name << " = " << def.get(cfg) << "\n";
    return o.str();
}

std::string config_hash(const RunConfig& cfg) {
    const std::string s = config_canonical(cfg);
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_config(const RunConfig& cfg, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("config: cannot write " + path);
    f << config_canonical(cfg);
    f.close();
    if (!f) throw IoError("config: write failed for " + path);
}

}  // namespace stgn
