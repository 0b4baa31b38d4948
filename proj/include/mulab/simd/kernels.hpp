#pragma once

// Data-parallel inner loops used by the network engine and the optimizer.
//
// Every kernel has a scalar reference implementation and SIMD variants
// (AVX2 on x86-64, NEON on AArch64). The active variant is chosen once at
// startup from CPU features and can be overridden with set_backend() or the
// MULAB_SIMD environment variable ("scalar", "avx2", "neon").
//
// All variants produce bit-identical results. Reductions use a fixed
// four-lane accumulation order that the scalar code reproduces exactly:
//
//   acc[k] += a[4i + k] * b[4i + k]      for the full blocks
//   acc[r] += a[n4 + r] * b[n4 + r]      for the tail, r < n % 4
//   result  = (acc[0] + acc[1]) + (acc[2] + acc[3])
//
// and no variant uses fused multiply-add.

#include <cstddef>
#include <cstdint>
#include <string_view>

namespace mulab::simd {

enum class Backend { Scalar, Avx2, Neon };

struct AdamCoefficients {
    double beta1;
    double beta2;
    double epsilon;
    double lr;
    double bias_correction1;  // 1 - beta1^t
    double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
    double (*dot)(const double* a, const double* b, std::size_t n);
    // y[i] += alpha * x[i]
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // In-place bias-corrected Adam step. When mask is non-null, entries with
    // mask[i] == 0 leave params, m and v untouched.
    void (*adam)(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
                 std::size_t n, const AdamCoefficients& c);
};

const KernelTable& scalar_kernels() noexcept;
// Null when the variant is not compiled in or not supported by this CPU.
const KernelTable* avx2_kernels() noexcept;
const KernelTable* neon_kernels() noexcept;

Backend active_backend() noexcept;
// Returns false (and changes nothing) if the backend is unavailable.
bool set_backend(Backend backend) noexcept;
bool backend_available(Backend backend) noexcept;
std::string_view backend_name(Backend backend) noexcept;

const KernelTable& kernels() noexcept;

inline double dot(const double* a, const double* b, std::size_t n) { return kernels().dot(a, b, n); }
inline void axpy(double alpha, const double* x, double* y, std::size_t n) { kernels().axpy(alpha, x, y, n); }
inline void adam(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
                 std::size_t n, const AdamCoefficients& c) {
    kernels().adam(params, grads, m, v, mask, n, c);
}

}  // namespace mulab::simd
