#pragma once

// Dense double-precision inner-loop kernels. Every kernel has a scalar
// reference implementation and, on x86-64 with AVX2+FMA, a vectorized
// variant selected once at startup. `stgn::kern::*` function pointers are
// the dispatched entry points; `stgn::kern::scalar::*` stay available for
// equivalence tests.

#include <cstddef>

namespace stgn::kern {

using DotFn = double (*)(const double*, const double*, std::size_t);
using AxpyFn = void (*)(double*, double, const double*, std::size_t);
using AddFn = void (*)(double*, const double*, const double*, std::size_t);
using MulFn = void (*)(double*, const double*, const double*, std::size_t);
using ScaleFn = void (*)(double*, const double*, double, std::size_t);
using SumFn = double (*)(const double*, std::size_t);
using SumSqFn = double (*)(const double*, std::size_t);
using MaxFn = double (*)(const double*, std::size_t);

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);  // y += a*x
void add(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_sq(const double* a, std::size_t n);
double max(const double* a, std::size_t n);  // n >= 1
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define STGN_HAVE_AVX2_BUILD 1
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double* y, double a, const double* x, std::size_t n);
void add(double* out, const double* a, const double* b, std::size_t n);
void mul(double* out, const double* a, const double* b, std::size_t n);
void scale(double* out, const double* a, double s, std::size_t n);
double sum(const double* a, std::size_t n);
double sum_sq(const double* a, std::size_t n);
double max(const double* a, std::size_t n);
}  // namespace avx2
#endif

// Dispatched entry points (set during static init, never change afterwards).
extern DotFn dot;
extern AxpyFn axpy;
extern AddFn add;
extern MulFn mul;
extern ScaleFn scale;
extern SumFn sum;
extern SumSqFn sum_sq;
extern MaxFn max;

// Name of the active backend: "scalar" or "avx2".
const char* active_backend();

}  // namespace stgn::kern
