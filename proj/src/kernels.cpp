#include "stgn/kernels.hpp"

namespace stgn::kern {

namespace {

bool have_avx2() {
#if defined(STGN_HAVE_AVX2_BUILD) && defined(__GNUC__)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const bool g_use_avx2 = have_avx2();

}  // namespace

#ifdef STGN_HAVE_AVX2_BUILD
DotFn dot = g_use_avx2 ? avx2::dot : scalar::dot;
AxpyFn axpy = g_use_avx2 ? avx2::axpy : scalar::axpy;
AddFn add = g_use_avx2 ? avx2::add : scalar::add;
MulFn mul = g_use_avx2 ? avx2::mul : scalar::mul;
ScaleFn scale = g_use_avx2 ? avx2::scale : scalar::scale;
SumFn sum = g_use_avx2 ? avx2::sum : scalar::sum;
SumSqFn sum_sq = g_use_avx2 ? avx2::sum_sq : scalar::sum_sq;
MaxFn max = g_use_avx2 ? avx2::max : scalar::max;
#else
DotFn dot = scalar::dot;
AxpyFn axpy = scalar::axpy;
AddFn add = scalar::add;
MulFn mul = scalar::mul;
ScaleFn scale = scalar::scale;
SumFn sum = scalar::sum;
SumSqFn sum_sq = scalar::sum_sq;
MaxFn max = scalar::max;
#endif

const char* active_backend() { return g_use_avx2 ? "avx2" : "scalar"; }

}  // namespace stgn::kern
