#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace gsroad {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-15;
};

/// First and second moment buffers for one parameter class.
struct AdamState {
  std::vector<double> m;
  std::vector<double> v;

  void resize(std::size_t n) {
    m.assign(n, 0.0);
    v.assign(n, 0.0);
  }
  bool operator==(const AdamState&) const = default;
};

/// One bias-corrected Adam update. `step` is 1-based.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state, double lr, std::uint64_t step,
               const AdamConfig& config);

}  // namespace gsroad
