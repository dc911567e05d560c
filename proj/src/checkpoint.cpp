#include "stgn/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "stgn/error.hpp"

namespace stgn {

namespace {

constexpr char kMagic[4] = {'S', 'T', 'G', 'N'};

void put_u32(std::ostream& f, std::uint32_t v) {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& f, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    f.write(reinterpret_cast<const char*>(b), 8);
}

void put_f64(std::ostream& f, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    put_u64(f, bits);
}

void put_str(std::ostream& f, const std::string& s) {
    put_u32(f, static_cast<std::uint32_t>(s.size()));
    f.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::uint32_t get_u32(std::istream& f) {
    unsigned char b[4];
    f.read(reinterpret_cast<char*>(b), 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

std::uint64_t get_u64(std::istream& f) {
    unsigned char b[8];
    f.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& f) {
    const std::uint64_t bits = get_u64(f);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string get_str(std::istream& f) {
    const std::uint32_t n = get_u32(f);
    std::string s(n, '\0');
    f.read(s.data(), n);
    return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const ParamStore& ps, const CheckpointMeta& meta,
                     const AdamW* opt) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot write " + path);
    f.write(kMagic, 4);
    put_u32(f, meta.version);
    put_str(f, meta.config_hash);
    put_u64(f, meta.step);
    put_u64(f, meta.rng.seed);
    for (int i = 0; i < 4; ++i) put_u64(f, meta.rng.s[i]);
    put_f64(f, meta.rng.spare);
    f.put(static_cast<char>(meta.rng.has_spare));

    // directory: name, shape, trainability, payload offset in doubles
    put_u32(f, static_cast<std::uint32_t>(ps.entries().size()));
    std::uint64_t offset = 0;
    for (const auto& e : ps.entries()) {
        put_str(f, e.name);
        put_u32(f, static_cast<std::uint32_t>(e.tensor.rank()));
        for (std::size_t i = 0; i < e.tensor.rank(); ++i) put_u32(f, static_cast<std::uint32_t>(e.tensor.dim(i)));
        f.put(static_cast<char>(e.tensor.requires_grad() ? 1 : 0));
        put_u64(f, offset);
        offset += e.tensor.size();
    }
    for (const auto& e : ps.entries()) {
        for (double v : e.tensor.data()) put_f64(f, v);
    }

    const bool with_opt = opt != nullptr;
    f.put(static_cast<char>(with_opt ? 1 : 0));
    if (with_opt) {
        if (opt->slots().size() != ps.entries().size()) {
            throw ConfigError("checkpoint: optimizer slots do not match the parameter store");
        }
        put_u64(f, opt->steps_taken());
        for (const auto& s : opt->slots()) {
            for (double v : s.m) put_f64(f, v);
            for (double v : s.v) put_f64(f, v);
        }
    }
    f.close();
    if (!f) throw IoError("checkpoint: write failed for " + path);
}

CheckpointMeta load_checkpoint(const std::string& path, ParamStore& ps, AdamW* opt) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("checkpoint: cannot open " + path);
    char magic[4];
    f.read(magic, 4);
    if (!f || std::memcmp(magic, kMagic, 4) != 0) throw IoError("checkpoint: bad magic in " + path);
    CheckpointMeta meta;
    meta.version = get_u32(f);
    if (meta.version != 1) throw IoError("checkpoint: unsupported version " + std::to_string(meta.version));
    meta.config_hash = get_str(f);
    meta.step = get_u64(f);
    meta.rng.seed = get_u64(f);
    for (int i = 0; i < 4; ++i) meta.rng.s[i] = get_u64(f);
    meta.rng.spare = get_f64(f);
    meta.rng.has_spare = static_cast<std::uint8_t>(f.get());

    const std::uint32_t count = get_u32(f);
    struct Dir {
        std::string name;
        Shape shape;
        bool trainable;
        std::uint64_t offset;
    };
    std::vector<Dir> dir;
    for (std::uint32_t i = 0; i < count; ++i) {
        Dir d;
        d.name = get_str(f);
        const std::uint32_t rank = get_u32(f);
        for (std::uint32_t r = 0; r < rank; ++r) d.shape.push_back(static_cast<int>(get_u32(f)));
        d.trainable = f.get() != 0;
        d.offset = get_u64(f);
        dir.push_back(std::move(d));
    }
    if (!f) throw IoError("checkpoint: truncated directory in " + path);

    std::uint64_t expect = 0;
    for (const auto& d : dir) {
        if (d.offset != expect) throw ConfigError("checkpoint: directory offset mismatch for " + d.name);
        expect += shape_numel(d.shape);
        Tensor* dst;
        if (ps.has(d.name)) {
            dst = &ps.get(d.name);
            if (dst->shape() != d.shape) {
                throw ConfigError("checkpoint: shape mismatch for " + d.name + ": file " + shape_str(d.shape) +
                                  " vs store " + shape_str(dst->shape()));
            }
        } else {
            dst = &ps.add(d.name, Tensor::zeros(d.shape));
        }
        for (double& v : dst->raw()) v = get_f64(f);
        dst->set_requires_grad(d.trainable);
    }
    if (!f) throw IoError("checkpoint: truncated payload in " + path);

    meta.has_optimizer = f.get() == 1;
    if (meta.has_optimizer && opt) {
        if (opt->slots().size() != dir.size()) {
            throw ConfigError("checkpoint: optimizer slots do not match the checkpoint");
        }
        opt->set_steps_taken(get_u64(f));
        for (std::size_t i = 0; i < dir.size(); ++i) {
            auto& s = opt->slots()[i];
            if (s.name != dir[i].name) throw ConfigError("checkpoint: optimizer slot order mismatch at " + s.name);
            for (double& v : s.m) v = get_f64(f);
            for (double& v : s.v) v = get_f64(f);
        }
        if (!f) throw IoError("checkpoint: truncated optimizer state in " + path);
    }
    return meta;
}

}  // namespace stgn
