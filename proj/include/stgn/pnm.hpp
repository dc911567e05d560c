#pragma once

// Binary PPM (P6) / PGM (P5) reader and writer, 8-bit. Color images are
// [H x W x 3] tensors in [0,1]; gray maps are [H x W].

#include <string>

#include "stgn/tensor.hpp"

namespace stgn {

void write_ppm(const std::string& path, const Tensor& img);
void write_pgm(const std::string& path, const Tensor& map);
Tensor read_ppm(const std::string& path);
Tensor read_pgm(const std::string& path);

}  // namespace stgn
