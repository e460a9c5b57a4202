#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "steer/ad/tensor.hpp"

namespace steer::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// First/second moment estimates, one slot per parameter tensor.
struct AdamState {
  std::vector<std::vector<double>> first_moment;
  std::vector<std::vector<double>> second_moment;
  std::uint64_t step = 0;

  static AdamState for_parameters(std::span<const Tensor> params);
};

/// One bias-corrected Adam update, reading gradients from the parameters.
/// Throws `ShapeMismatch` when the state does not line up with `params`.
void adam_step(std::span<Tensor> params, AdamState& state, const AdamConfig& config);

}  // namespace steer::ad
