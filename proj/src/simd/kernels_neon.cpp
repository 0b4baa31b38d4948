#include "kernels_impl.hpp"

#if defined(MULAB_HAVE_NEON_KERNELS)

#include <arm_neon.h>

namespace mulab::simd::detail {

// Two float64x2 registers hold lanes {0,1} and {2,3} of the shared four-lane order.
double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t lo = vdupq_n_f64(0.0);
    float64x2_t hi = vdupq_n_f64(0.0);
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        lo = vaddq_f64(lo, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
        hi = vaddq_f64(hi, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
    }
    double lanes[4];
    vst1q_f64(lanes, lo);
    vst1q_f64(lanes + 2, hi);
    for (std::size_t i = n4; i < n; ++i) lanes[i - n4] = lanes[i - n4] + a[i] * b[i];
    return (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    const std::size_t n2 = n & ~std::size_t{1};
    for (std::size_t i = 0; i < n2; i += 2) {
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
    }
    for (std::size_t i = n2; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void adam_neon(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
               std::size_t n, const AdamCoefficients& c) {
    const float64x2_t b1 = vdupq_n_f64(c.beta1);
    const float64x2_t b2 = vdupq_n_f64(c.beta2);
    const float64x2_t omb1 = vdupq_n_f64(1.0 - c.beta1);
    const float64x2_t omb2 = vdupq_n_f64(1.0 - c.beta2);
    const float64x2_t bc1 = vdupq_n_f64(c.bias_correction1);
    const float64x2_t bc2 = vdupq_n_f64(c.bias_correction2);
    const float64x2_t lr = vdupq_n_f64(c.lr);
    const float64x2_t eps = vdupq_n_f64(c.epsilon);

    const std::size_t n2 = n & ~std::size_t{1};
    for (std::size_t i = 0; i < n2; i += 2) {
        uint64x2_t take = vdupq_n_u64(~0ULL);
        if (mask) {
            if (mask[i] == 0 && mask[i + 1] == 0) continue;
            const std::uint64_t bits[2] = {mask[i] ? ~0ULL : 0ULL, mask[i + 1] ? ~0ULL : 0ULL};
            take = vld1q_u64(bits);
        }
        const float64x2_t g = vld1q_f64(grads + i);
        const float64x2_t m_old = vld1q_f64(m + i);
        const float64x2_t v_old = vld1q_f64(v + i);
        const float64x2_t p_old = vld1q_f64(params + i);

        const float64x2_t m_new = vaddq_f64(vmulq_f64(b1, m_old), vmulq_f64(omb1, g));
        const float64x2_t v_new = vaddq_f64(vmulq_f64(b2, v_old), vmulq_f64(omb2, vmulq_f64(g, g)));
        const float64x2_t m_hat = vdivq_f64(m_new, bc1);
        const float64x2_t v_hat = vdivq_f64(v_new, bc2);
        const float64x2_t step = vdivq_f64(vmulq_f64(lr, m_hat), vaddq_f64(vsqrtq_f64(v_hat), eps));
        const float64x2_t p_new = vsubq_f64(p_old, step);

        vst1q_f64(params + i, vbslq_f64(take, p_new, p_old));
        vst1q_f64(m + i, vbslq_f64(take, m_new, m_old));
        vst1q_f64(v + i, vbslq_f64(take, v_new, v_old));
    }
    if (n2 < n) adam_scalar(params + n2, grads + n2, m + n2, v + n2, mask ? mask + n2 : nullptr, n - n2, c);
}

}  // namespace mulab::simd::detail

#endif
