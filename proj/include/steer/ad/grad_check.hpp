#pragma once

#include <cstdint>
#include <functional>
#include <span>

#include "steer/ad/tensor.hpp"

namespace steer::ad {

struct GradCheckOptions {
  std::size_t samples = 200;
  std::uint64_t seed = 0;
  /// Central-difference step is `step_scale * (1 + |x|)`.
  double step_scale = 1e-6;
  /// Denominator floor so coordinates with vanishing gradient compare absolutely.
  double denominator_floor = 1e-8;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t worst_parameter = 0;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
};

/// Compares adjoint gradients against central finite differences at randomly
/// sampled parameter coordinates. `loss_fn` must rebuild the scalar loss from
/// the current parameter values on every call.
GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options = {});

}  // namespace steer::ad
