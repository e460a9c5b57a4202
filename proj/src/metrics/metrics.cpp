#include "steer/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "steer/error.hpp"

namespace steer::metrics {

namespace {

void require_same(const ad::Tensor& a, const ad::Tensor& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(who) + ": shapes " + ad::shape_to_string(a.shape()) + " and " +
                                              ad::shape_to_string(b.shape()) + " differ");
  }
}

void require_range(double range, const char* who) {
  if (!(range > 0.0) || !std::isfinite(range)) {
    throw Error(ErrorKind::InvalidArgument, std::string(who) + ": dynamic range must be positive");
  }
}

}  // namespace

double mse(const ad::Tensor& a, const ad::Tensor& b) {
  require_same(a, b, "mse");
  if (a.size() == 0) return 0.0;
  double acc = 0.0;
  auto x = a.values(), y = b.values();
  for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - y[i]) * (x[i] - y[i]);
  return acc / static_cast<double>(x.size());
}

double dynamic_range(const ad::Tensor& truth) {
  auto v = truth.values();
  if (v.empty()) return 0.0;
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return *hi - *lo;
}

double ssim(const ad::Tensor& a, const ad::Tensor& b, double range, const SsimOptions& options) {
  require_same(a, b, "ssim");
  require_range(range, "ssim");
  if (a.rank() < 2) throw Error(ErrorKind::ShapeMismatch, "ssim: images need two axes");
  const std::size_t h = a.dim(a.rank() - 2), w = a.dim(a.rank() - 1);
  const std::size_t planes = a.size() / (h * w);
  const auto win = static_cast<std::size_t>(options.window);
  if (h < win || w < win) throw Error(ErrorKind::ShapeMismatch, "ssim: image smaller than the window");

  std::vector<double> g(win);
  double total = 0.0;
  const double half = (static_cast<double>(win) - 1.0) / 2.0;
  for (std::size_t i = 0; i < win; ++i) {
    const double d = static_cast<double>(i) - half;
    total += g[i] = std::exp(-d * d / (2.0 * options.sigma * options.sigma));
  }
  for (auto& v : g) v /= total;

  const double c1 = (options.k1 * range) * (options.k1 * range);
  const double c2 = (options.k2 * range) * (options.k2 * range);
  const std::size_t oh = h - win + 1, ow = w - win + 1;

  // Separable valid filtering of x, y, x^2, y^2, xy.
  auto filter = [&](const std::vector<double>& img) {
    std::vector<double> rows(h * ow, 0.0), out(oh * ow, 0.0);
    for (std::size_t i = 0; i < h; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < win; ++k) acc += g[k] * img[i * w + j + k];
        rows[i * ow + j] = acc;
      }
    for (std::size_t i = 0; i < oh; ++i)
      for (std::size_t j = 0; j < ow; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < win; ++k) acc += g[k] * rows[(i + k) * ow + j];
        out[i * ow + j] = acc;
      }
    return out;
  };

  double sum = 0.0;
  for (std::size_t p = 0; p < planes; ++p) {
    auto pa = a.values().subspan(p * h * w, h * w), pb = b.values().subspan(p * h * w, h * w);
    std::vector<double> x(pa.begin(), pa.end()), y(pb.begin(), pb.end()), xx(h * w), yy(h * w), xy(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter(x), my = filter(y), sxx = filter(xx), syy = filter(yy), sxy = filter(xy);
    for (std::size_t i = 0; i < oh * ow; ++i) {
      const double vx = sxx[i] - mx[i] * mx[i], vy = syy[i] - my[i] * my[i], cov = sxy[i] - mx[i] * my[i];
      sum += ((2.0 * mx[i] * my[i] + c1) * (2.0 * cov + c2)) /
             ((mx[i] * mx[i] + my[i] * my[i] + c1) * (vx + vy + c2));
    }
  }
  return sum / static_cast<double>(planes * oh * ow);
}

std::optional<double> psnr(const ad::Tensor& a, const ad::Tensor& b, double range) {
  require_range(range, "psnr");
  const double m = mse(a, b);
  if (m == 0.0) return std::nullopt;
  return 10.0 * std::log10(range * range / m);
}

MetricReport compare(const ad::Tensor& estimate, const ad::Tensor& truth) {
  MetricReport r;
  r.dynamic_range = dynamic_range(truth);
  r.mse = mse(estimate, truth);
  const double range = r.dynamic_range > 0.0 ? r.dynamic_range : 1.0;
  r.ssim = ssim(estimate, truth, range);
  r.psnr = psnr(estimate, truth, range);
  return r;
}

}  // namespace steer::metrics
