#include "steer/imaging/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "steer/error.hpp"

namespace steer::imaging {

namespace {

struct Ellipse {
  double x0, y0, a, b, degrees, value;
};

// Toft's modified Shepp-Logan set.
constexpr Ellipse kHead[] = {
    {0.0, 0.0, 0.69, 0.92, 0.0, 1.0},        {0.0, -0.0184, 0.6624, 0.874, 0.0, -0.8},
    {0.22, 0.0, 0.11, 0.31, -18.0, -0.2},    {-0.22, 0.0, 0.16, 0.41, 18.0, -0.2},
    {0.0, 0.35, 0.21, 0.25, 0.0, 0.1},       {0.0, 0.1, 0.046, 0.046, 0.0, 0.1},
    {0.0, -0.1, 0.046, 0.046, 0.0, 0.1},     {-0.08, -0.605, 0.046, 0.023, 0.0, 0.1},
    {0.0, -0.605, 0.023, 0.023, 0.0, 0.1},   {0.06, -0.605, 0.023, 0.046, 0.0, 0.1},
};

double derenzo_value(double x, double y, const PhantomSpec& spec, const DerenzoLayout& layout) {
  const double r2 = x * x + y * y;
  if (r2 > layout.body_radius * layout.body_radius) return 0.0;
  if (r2 <= layout.cold_radius * layout.cold_radius) return 0.0;
  for (const auto& rod : layout.rods) {
    const double dx = x - rod.x, dy = y - rod.y, rr = rod.diameter / 2.0;
    if (dx * dx + dy * dy <= rr * rr) return spec.background * spec.hot_ratio;
  }
  return spec.background;
}

}  // namespace

void validate(const PhantomSpec& spec) {
  if (spec.rod_diameters.empty()) throw Error(ErrorKind::InvalidArgument, "phantom needs at least one rod diameter");
  for (std::size_t i = 0; i < spec.rod_diameters.size(); ++i) {
    if (!(spec.rod_diameters[i] > 0.0)) throw Error(ErrorKind::InvalidArgument, "rod diameters must be positive");
    if (i > 0 && !(spec.rod_diameters[i] < spec.rod_diameters[i - 1])) {
      throw Error(ErrorKind::InvalidArgument, "rod diameters must be strictly descending");
    }
  }
  if (!(spec.hot_ratio > 1.0)) throw Error(ErrorKind::InvalidArgument, "hot:background ratio must exceed 1");
  if (!(spec.background > 0.0)) throw Error(ErrorKind::InvalidArgument, "background must be positive");
  if (spec.cold_diameter < 0.0 || spec.margin < 0.0 || !(spec.spacing_factor >= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "cold diameter and margin must be non-negative, spacing factor >= 1");
  }
  if (!(spec.body_fraction > 0.0 && spec.body_fraction <= 1.0)) {
    throw Error(ErrorKind::InvalidArgument, "body fraction must lie in (0, 1]");
  }
  if (spec.anti_alias < 1) throw Error(ErrorKind::InvalidArgument, "anti-alias factor must be at least 1");
}

std::vector<Rod> DerenzoLayout::sector(int index) const {
  std::vector<Rod> out;
  for (const auto& rod : rods)
    if (rod.sector == index) out.push_back(rod);
  return out;
}

DerenzoLayout derenzo_layout(const ImageGrid& grid, const PhantomSpec& spec) {
  validate(grid);
  validate(spec);
  DerenzoLayout layout;
  layout.body_radius = spec.body_fraction * grid.fov_mm() / 2.0;
  layout.cold_radius = spec.cold_diameter / 2.0;
  const double limit = layout.body_radius - spec.margin;
  const int sectors = static_cast<int>(std::min<std::size_t>(6, spec.rod_diameters.size()));
  for (int s = 0; s < sectors; ++s) {
    const double d = spec.rod_diameters[static_cast<std::size_t>(s)];
    const double pitch = spec.spacing_factor * d;
    const double row_step = pitch * std::sqrt(3.0) / 2.0;
    // Apex far enough out to clear the cold region and both sector edges.
    const double apex = std::max(layout.cold_radius + spec.margin + d / 2.0, d + 2.0 * spec.margin);
    const double phi = std::numbers::pi / 2.0 - s * std::numbers::pi / 3.0;
    const double ux = std::cos(phi), uy = std::sin(phi);
    const double vx = -uy, vy = ux;
    std::size_t placed = 0;
    for (int row = 0;; ++row) {
      const double along = apex + row * row_step;
      if (along + d / 2.0 > limit) break;
      for (int k = 0; k <= row; ++k) {
        const double lateral = pitch * (k - row / 2.0);
        const double x = along * ux + lateral * vx, y = along * uy + lateral * vy;
        if (std::hypot(x, y) + d / 2.0 > limit) continue;
        layout.rods.push_back({x, y, d, s});
        ++placed;
      }
    }
    if (placed == 0) {
      std::ostringstream msg;
      msg << "rods of diameter " << d << " mm do not fit in their sector (body radius " << layout.body_radius
          << " mm, cold radius " << layout.cold_radius << " mm)";
      throw Error(ErrorKind::Geometry, msg.str());
    }
  }
  return layout;
}

ad::Tensor render_derenzo(const ImageGrid& grid, const PhantomSpec& spec, const DerenzoLayout& layout) {
  const std::size_t h = grid.height, w = grid.width;
  const double c = grid.center();
  const int ss = spec.anti_alias;
  std::vector<double> values(h * w);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      double acc = 0.0;
      for (int a = 0; a < ss; ++a)
        for (int b = 0; b < ss; ++b) {
          const double oy = (a + 0.5) / ss - 0.5, ox = (b + 0.5) / ss - 0.5;
          const double x = (static_cast<double>(j) + ox - c) * grid.pitch;
          const double y = (c - static_cast<double>(i) - oy) * grid.pitch;
          acc += derenzo_value(x, y, spec, layout);
        }
      values[i * w + j] = acc / (ss * ss);
    }
  }
  return ad::Tensor::from({h, w}, std::move(values));
}

ad::Tensor derenzo_phantom(const ImageGrid& grid, const PhantomSpec& spec) {
  return render_derenzo(grid, spec, derenzo_layout(grid, spec));
}

std::vector<double> contrast_recovery(const ad::Tensor& image, const ImageGrid& grid, const PhantomSpec& spec,
                                      const DerenzoLayout& layout) {
  const std::size_t h = grid.height, w = grid.width;
  if (image.size() != h * w) throw Error(ErrorKind::ShapeMismatch, "contrast_recovery: image does not match grid");
  const double c = grid.center(), clearance = 2.0 * grid.pitch;
  std::vector<double> rod_sum(6, 0.0), rod_count(6, 0.0);
  double bg_sum = 0.0, bg_count = 0.0;
  auto v = image.values();
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double x = (static_cast<double>(j) - c) * grid.pitch, y = (c - static_cast<double>(i)) * grid.pitch;
      const double r = std::hypot(x, y);
      bool background = r >= layout.cold_radius + clearance && r <= layout.body_radius - clearance;
      for (const auto& rod : layout.rods) {
        const double dist = std::hypot(x - rod.x, y - rod.y);
        const double core = std::max(rod.diameter / 4.0, grid.pitch / 2.0);
        if (dist <= core) {
          rod_sum[static_cast<std::size_t>(rod.sector)] += v[i * w + j];
          rod_count[static_cast<std::size_t>(rod.sector)] += 1.0;
        }
        if (dist < rod.diameter / 2.0 + clearance) background = false;
      }
      if (background) {
        bg_sum += v[i * w + j];
        bg_count += 1.0;
      }
    }
  }
  if (bg_count == 0.0) throw Error(ErrorKind::Geometry, "contrast_recovery: no background pixels");
  const double bg = bg_sum / bg_count;
  std::vector<double> out;
  for (std::size_t s = 0; s < std::min<std::size_t>(6, spec.rod_diameters.size()); ++s) {
    if (rod_count[s] == 0.0 || bg == 0.0) {
      out.push_back(0.0);
      continue;
    }
    out.push_back((rod_sum[s] / rod_count[s] / bg - 1.0) / (spec.hot_ratio - 1.0));
  }
  return out;
}

ad::Tensor brain_phantom(const ImageGrid& grid) {
  const std::size_t h = grid.height, w = grid.width;
  const double cy = (static_cast<double>(h) - 1.0) / 2.0, cx = (static_cast<double>(w) - 1.0) / 2.0;
  const double scale = static_cast<double>(std::min(h, w)) / 2.0;
  std::vector<double> values(h * w, 0.0);
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = 0; j < w; ++j) {
      const double x = (static_cast<double>(j) - cx) / scale, y = (cy - static_cast<double>(i)) / scale;
      double v = 0.0;
      for (const auto& e : kHead) {
        const double t = e.degrees * std::numbers::pi / 180.0;
        const double dx = x - e.x0, dy = y - e.y0;
        const double u = dx * std::cos(t) + dy * std::sin(t), q = -dx * std::sin(t) + dy * std::cos(t);
        if ((u * u) / (e.a * e.a) + (q * q) / (e.b * e.b) <= 1.0) v += e.value;
      }
      values[i * w + j] = std::clamp(v, 0.0, 1.0);
    }
  }
  return ad::Tensor::from({h, w}, std::move(values));
}

ad::Tensor add_poisson_noise(const ad::Tensor& image, double counts_per_unit, std::uint64_t seed) {
  if (!(counts_per_unit > 0.0)) throw Error(ErrorKind::InvalidArgument, "counts_per_unit must be positive");
  std::mt19937_64 rng(seed);
  std::vector<double> out(image.size());
  auto v = image.values();
  for (std::size_t k = 0; k < v.size(); ++k) {
    if (v[k] < 0.0 || !std::isfinite(v[k])) {
      throw Error(ErrorKind::InvalidArgument, "Poisson noise needs non-negative pixels (index " + std::to_string(k) + ")");
    }
    const double lambda = v[k] * counts_per_unit;
    if (lambda == 0.0) {
      out[k] = 0.0;
      continue;
    }
    std::poisson_distribution<long long> draw(lambda);
    out[k] = static_cast<double>(draw(rng)) / counts_per_unit;
  }
  return ad::Tensor::from(image.shape(), std::move(out));
}

}  // namespace steer::imaging
