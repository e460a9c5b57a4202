#pragma once

#include <optional>

#include "steer/ad/tensor.hpp"

namespace steer::metrics {

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
};

struct MetricReport {
  double mse = 0.0;
  double ssim = 0.0;
  /// Empty when the images are identical (infinite PSNR).
  std::optional<double> psnr;
  double dynamic_range = 0.0;

  bool psnr_infinite() const { return !psnr.has_value(); }
};

/// Mean squared difference over all elements.
double mse(const ad::Tensor& a, const ad::Tensor& b);

/// max - min of the image.
double dynamic_range(const ad::Tensor& truth);

/// Mean SSIM over all fully contained Gaussian windows of the last two axes.
double ssim(const ad::Tensor& a, const ad::Tensor& b, double range, const SsimOptions& options = {});

/// 10 log10(range^2 / mse); empty for mse = 0.
std::optional<double> psnr(const ad::Tensor& a, const ad::Tensor& b, double range);

/// All three metrics of `estimate` against `truth`, range from the truth.
MetricReport compare(const ad::Tensor& estimate, const ad::Tensor& truth);

}  // namespace steer::metrics
