#include <cmath>

#include "mulab/error.hpp"
#include "mulab/optim/optim.hpp"
#include "mulab/simd/kernels.hpp"

namespace mulab::optim {

AdamState AdamState::fresh(std::size_t num_params) {
    AdamState s;
    s.m.assign(num_params, 0.0);
    s.v.assign(num_params, 0.0);
    return s;
}

void adam_step(std::span<double> params, const nn::GradientVector& grads, AdamState& state, double lr,
               std::span<const std::uint8_t> mask) {
    const std::size_t n = params.size();
    if (grads.values.size() != n || state.m.size() != n || state.v.size() != n) {
        throw ShapeError("adam_step: params, gradients and moments differ in length");
    }
    if (!mask.empty() && mask.size() != n) throw ShapeError("adam_step: mask length differs from params");
    if (!(lr > 0.0)) throw ConfigError("adam_step: learning rate must be positive");
    for (double g : grads.values) {
        if (!std::isfinite(g)) throw NumericError("adam_step: non-finite gradient");
    }
    state.step_count += 1;
    const double t = static_cast<double>(state.step_count);
    const simd::AdamCoefficients c{state.beta1,
                                   state.beta2,
                                   state.epsilon,
                                   lr,
                                   1.0 - std::pow(state.beta1, t),
                                   1.0 - std::pow(state.beta2, t)};
    simd::adam(params.data(), grads.values.data(), state.m.data(), state.v.data(), mask.empty() ? nullptr : mask.data(),
               n, c);
}

}  // namespace mulab::optim
