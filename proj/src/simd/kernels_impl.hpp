#pragma once

#include "mulab/simd/kernels.hpp"

namespace mulab::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void adam_scalar(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
                 std::size_t n, const AdamCoefficients& c);

#if defined(__x86_64__) || defined(_M_X64)
#define MULAB_HAVE_AVX2_KERNELS 1
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void adam_avx2(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
               std::size_t n, const AdamCoefficients& c);
#endif

#if defined(__aarch64__)
#define MULAB_HAVE_NEON_KERNELS 1
double dot_neon(const double* a, const double* b, std::size_t n);
void axpy_neon(double alpha, const double* x, double* y, std::size_t n);
void adam_neon(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
               std::size_t n, const AdamCoefficients& c);
#endif

}  // namespace mulab::simd::detail
