#include "gsroad/optimizer.hpp"

#include <cmath>

#include "gsroad/error.hpp"

namespace gsroad {

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr, std::uint64_t step,
               const AdamConfig& config) {
  if (grad.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCode::InputError, "adam_step: parameter, gradient and state sizes differ");
  }
  if (step == 0) throw Error(ErrorCode::InputError, "adam_step: step is 1-based");
  const double b1 = config.beta1, b2 = config.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  const double step_size = lr / c1;
  const double inv_sqrt_c2 = 1.0 / std::sqrt(c2);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
    params[i] -= step_size * state.m[i] / (std::sqrt(state.v[i]) * inv_sqrt_c2 + config.eps);
  }
}

}  // namespace gsroad
