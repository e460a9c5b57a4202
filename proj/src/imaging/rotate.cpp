#include "steer/imaging/rotate.hpp"

#include <cmath>

#include "steer/error.hpp"

namespace steer::imaging {

void rotate_plane(std::span<const double> in, std::size_t height, std::size_t width, double angle,
                  std::span<double> out) {
  if (in.size() != height * width || out.size() != in.size()) {
    throw Error(ErrorKind::ShapeMismatch, "rotate_plane: buffer sizes do not match the plane");
  }
  const double cy = (static_cast<double>(height) - 1.0) / 2.0;
  const double cx = (static_cast<double>(width) - 1.0) / 2.0;
  const double c = std::cos(angle), s = std::sin(angle);
  const auto h = static_cast<std::ptrdiff_t>(height), w = static_cast<std::ptrdiff_t>(width);
  auto pixel = [&](std::ptrdiff_t r, std::ptrdiff_t col) {
    return (r < 0 || r >= h || col < 0 || col >= w) ? 0.0 : in[static_cast<std::size_t>(r * w + col)];
  };
  for (std::ptrdiff_t i = 0; i < h; ++i) {
    for (std::ptrdiff_t j = 0; j < w; ++j) {
      const double x = static_cast<double>(j) - cx, y = static_cast<double>(i) - cy;
      const double sx = c * x + s * y + cx;
      const double sy = -s * x + c * y + cy;
      const double fx = std::floor(sx), fy = std::floor(sy);
      const double ax = sx - fx, ay = sy - fy;
      const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
      out[static_cast<std::size_t>(i * w + j)] = (1 - ay) * ((1 - ax) * pixel(y0, x0) + ax * pixel(y0, x0 + 1)) +
                                                 ay * ((1 - ax) * pixel(y0 + 1, x0) + ax * pixel(y0 + 1, x0 + 1));
    }
  }
}

void rotate_plane_quarter(std::span<const double> in, std::size_t size, int quarter_turns, std::span<double> out) {
  if (in.size() != size * size || out.size() != in.size()) {
    throw Error(ErrorKind::ShapeMismatch, "rotate_plane_quarter: buffer sizes do not match a square plane");
  }
  const int q = ((quarter_turns % 4) + 4) % 4;
  const std::size_t n = size - 1;
  for (std::size_t i = 0; i < size; ++i) {
    for (std::size_t j = 0; j < size; ++j) {
      // Source pixel of R(-90 q) applied to (i, j).
      std::size_t si = i, sj = j;
      switch (q) {
        case 1: si = n - j; sj = i; break;
        case 2: si = n - i; sj = n - j; break;
        case 3: si = j; sj = n - i; break;
        default: break;
      }
      out[i * size + j] = in[si * size + sj];
    }
  }
}

}  // namespace steer::imaging
