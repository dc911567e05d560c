#include "stgn/pnm.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <vector>

namespace stgn {

namespace {

unsigned char quant(double v) {
    const double c = std::clamp(v, 0.0, 1.0);
    return static_cast<unsigned char>(std::lround(c * 255.0));
}

void write_pnm(const std::string& path, const char* magic, int w, int h, std::span<const double> data) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << magic << "\n" << w << " " << h << "\n255\n";
    std::vector<unsigned char> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) buf[i] = quant(data[i]);
    f.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (!f) throw IoError("write failed: " + path);
}

struct PnmHeader {
    std::string magic;
    int w, h, maxval;
};

PnmHeader read_header(std::ifstream& f, const std::string& path) {
    PnmHeader hd;
    f >> hd.magic >> hd.w >> hd.h >> hd.maxval;
    if (!f || hd.w <= 0 || hd.h <= 0 || hd.maxval != 255) throw IoError("bad pnm header: " + path);
    f.get();  // single whitespace after maxval
    return hd;
}

std::vector<double> read_payload(std::ifstream& f, std::size_t n, const std::string& path) {
    std::vector<unsigned char> buf(n);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(n));
    if (!f) throw IoError("truncated pnm payload: " + path);
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = buf[i] / 255.0;
    return out;
}

}  // namespace

void write_ppm(const std::string& path, const Tensor& img) {
    if (img.rank() != 3 || img.dim(2) != 3) throw ShapeError("write_ppm: " + shape_str(img.shape()));
    write_pnm(path, "P6", img.dim(1), img.dim(0), img.data());
}

void write_pgm(const std::string& path, const Tensor& map) {
    if (map.rank() != 2) throw ShapeError("write_pgm: " + shape_str(map.shape()));
    write_pnm(path, "P5", map.dim(1), map.dim(0), map.data());
}

Tensor read_ppm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    PnmHeader hd = read_header(f, path);
    if (hd.magic != "P6") throw IoError("expected P6: " + path);
    auto data = read_payload(f, static_cast<std::size_t>(hd.w) * hd.h * 3, path);
    return Tensor::from({hd.h, hd.w, 3}, std::move(data));
}

Tensor read_pgm(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open: " + path);
    PnmHeader hd = read_header(f, path);
    if (hd.magic != "P5") throw IoError("expected P5: " + path);
    auto data = read_payload(f, static_cast<std::size_t>(hd.w) * hd.h, path);
    return Tensor::from({hd.h, hd.w}, std::move(data));
}

}  // namespace stgn
