#pragma once

// Central finite-difference verification of reverse-mode gradients.

#include <functional>

#include "stgn/tensor.hpp"

namespace stgn {

// f must rebuild its graph on every call and return a scalar. Returns the
// max over coordinates of the relative error between the reverse-mode
// gradient and the central difference (f(x+h e_i) - f(x-h e_i)) / 2h, with
// relative error |a-b| / max(|a|, |b|, 1e-8). Throws NumericError (with the
// coordinate index) on non-finite values.
double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor x, double h = 1e-5);

}  // namespace stgn
