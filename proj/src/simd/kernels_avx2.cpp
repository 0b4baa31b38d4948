#include "kernels_impl.hpp"

#if defined(MULAB_HAVE_AVX2_KERNELS)

#include <immintrin.h>

#include <cmath>

#define MULAB_AVX2 __attribute__((target("avx2")))

namespace mulab::simd::detail {

MULAB_AVX2 double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
    }
    alignas(32) double lanes[4];
    _mm256_store_pd(lanes, acc);
    for (std::size_t i = n4; i < n; ++i) lanes[i - n4] = lanes[i - n4] + a[i] * b[i];
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

MULAB_AVX2 void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        const __m256d vy = _mm256_loadu_pd(y + i);
        _mm256_storeu_pd(y + i, _mm256_add_pd(vy, _mm256_mul_pd(va, _mm256_loadu_pd(x + i))));
    }
    for (std::size_t i = n4; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

MULAB_AVX2 void adam_avx2(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
                          std::size_t n, const AdamCoefficients& c) {
    const __m256d b1 = _mm256_set1_pd(c.beta1);
    const __m256d b2 = _mm256_set1_pd(c.beta2);
    const __m256d omb1 = _mm256_set1_pd(1.0 - c.beta1);
    const __m256d omb2 = _mm256_set1_pd(1.0 - c.beta2);
    const __m256d bc1 = _mm256_set1_pd(c.bias_correction1);
    const __m256d bc2 = _mm256_set1_pd(c.bias_correction2);
    const __m256d lr = _mm256_set1_pd(c.lr);
    const __m256d eps = _mm256_set1_pd(c.epsilon);
    const __m256i zero = _mm256_setzero_si256();

    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        __m256d keep = _mm256_setzero_pd();  // all-zero bits: take the updated lane
        if (mask) {
            std::uint32_t packed;
            __builtin_memcpy(&packed, mask + i, 4);
            if (packed == 0) continue;
            const __m256i wide = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(static_cast<int>(packed)));
            keep = _mm256_castsi256_pd(_mm256_cmpeq_epi64(wide, zero));
        }
        const __m256d g = _mm256_loadu_pd(grads + i);
        const __m256d m_old = _mm256_loadu_pd(m + i);
        const __m256d v_old = _mm256_loadu_pd(v + i);
        const __m256d p_old = _mm256_loadu_pd(params + i);

        const __m256d m_new = _mm256_add_pd(_mm256_mul_pd(b1, m_old), _mm256_mul_pd(omb1, g));
        const __m256d v_new = _mm256_add_pd(_mm256_mul_pd(b2, v_old), _mm256_mul_pd(omb2, _mm256_mul_pd(g, g)));
        const __m256d m_hat = _mm256_div_pd(m_new, bc1);
        const __m256d v_hat = _mm256_div_pd(v_new, bc2);
        const __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, m_hat), _mm256_add_pd(_mm256_sqrt_pd(v_hat), eps));
        const __m256d p_new = _mm256_sub_pd(p_old, step);

        _mm256_storeu_pd(params + i, _mm256_blendv_pd(p_new, p_old, keep));
        _mm256_storeu_pd(m + i, _mm256_blendv_pd(m_new, m_old, keep));
        _mm256_storeu_pd(v + i, _mm256_blendv_pd(v_new, v_old, keep));
    }
    if (n4 < n) adam_scalar(params + n4, grads + n4, m + n4, v + n4, mask ? mask + n4 : nullptr, n - n4, c);
}

}  // namespace mulab::simd::detail

#endif
