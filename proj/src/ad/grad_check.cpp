#include "steer/ad/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "steer/error.hpp"

namespace steer::ad {

GradCheckResult grad_check(const std::function<Tensor()>& loss_fn, std::span<Tensor> params,
                           const GradCheckOptions& options) {
  std::size_t total = 0;
  for (const auto& p : params) total += p.size();
  if (total == 0) throw Error(ErrorKind::InvalidArgument, "grad_check: no parameters");

  for (auto& p : params) p.zero_grad();
  backward(loss_fn());
  std::vector<std::vector<double>> analytic;
  for (const auto& p : params) analytic.emplace_back(p.grad().begin(), p.grad().end());

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::size_t> pick(0, total - 1);
  GradCheckResult result;
  for (std::size_t s = 0; s < options.samples; ++s) {
    std::size_t flat = pick(rng), which = 0;
    while (flat >= params[which].size()) flat -= params[which++].size();

    auto values = params[which].mutable_values();
    const double x = values[flat];
    const double h = options.step_scale * (1.0 + std::abs(x));
    values[flat] = x + h;
    const double plus = loss_fn().item();
    values[flat] = x - h;
    const double minus = loss_fn().item();
    values[flat] = x;

    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic[which][flat];
    const double denom = std::max({std::abs(a), std::abs(numeric), options.denominator_floor});
    const double err = std::abs(a - numeric) / denom;
    if (err > result.max_relative_error || s == 0) {
      result = {err, which, flat, a, numeric};
    }
  }
  return result;
}

}  // namespace steer::ad
