#include <cmath>
#include <numbers>

#include "mulab/error.hpp"
#include "mulab/optim/optim.hpp"

namespace mulab::optim {

double cosine_lr(const LrSchedule& s, std::uint64_t step) {
    if (s.total_steps < 1) throw ConfigError("schedule needs total_steps >= 1");
    if (!(s.eta_min >= 0.0 && s.eta_min <= s.lr0)) throw ConfigError("schedule needs 0 <= eta_min <= lr0");
    if (step > s.total_steps) {
        throw ConfigError("schedule step " + std::to_string(step) + " beyond total_steps " + std::to_string(s.total_steps));
    }
    const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(s.total_steps);
    return s.eta_min + 0.5 * (s.lr0 - s.eta_min) * (1.0 + std::cos(phase));
}

}  // namespace mulab::optim
