#include <cmath>

#include "kernels_impl.hpp"

namespace mulab::simd::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double acc[4] = {0.0, 0.0, 0.0, 0.0};
    const std::size_t n4 = n & ~std::size_t{3};
    for (std::size_t i = 0; i < n4; i += 4) {
        acc[0] = acc[0] + a[i] * b[i];
        acc[1] = acc[1] + a[i + 1] * b[i + 1];
        acc[2] = acc[2] + a[i + 2] * b[i + 2];
        acc[3] = acc[3] + a[i + 3] * b[i + 3];
    }
    for (std::size_t i = n4; i < n; ++i) acc[i - n4] = acc[i - n4] + a[i] * b[i];
    return (acc[0] + acc[1]) + (acc[2] + acc[3]);
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + alpha * x[i];
}

void adam_scalar(double* params, const double* grads, double* m, double* v, const std::uint8_t* mask,
                 std::size_t n, const AdamCoefficients& c) {
    const double one_minus_b1 = 1.0 - c.beta1;
    const double one_minus_b2 = 1.0 - c.beta2;
    for (std::size_t i = 0; i < n; ++i) {
        if (mask && mask[i] == 0) continue;
        const double g = grads[i];
        const double mi = c.beta1 * m[i] + one_minus_b1 * g;
        const double vi = c.beta2 * v[i] + one_minus_b2 * (g * g);
        const double m_hat = mi / c.bias_correction1;
        const double v_hat = vi / c.bias_correction2;
        params[i] = params[i] - (c.lr * m_hat) / (std::sqrt(v_hat) + c.epsilon);
        m[i] = mi;
        v[i] = vi;
    }
}

}  // namespace mulab::simd::detail
