#pragma once

#include <cstddef>
#include <span>

namespace steer::imaging {

/// out(p) = in(R(-angle) p), rotating about the plane center with bilinear
/// interpolation; samples falling outside the plane read as zero.
/// Coordinates are x = column - cx, y = row - cy.
void rotate_plane(std::span<const double> in, std::size_t height, std::size_t width, double angle,
                  std::span<double> out);

/// Exact rotation by quarter_turns * 90 degrees (a pixel permutation).
/// Requires a square plane.
void rotate_plane_quarter(std::span<const double> in, std::size_t size, int quarter_turns, std::span<double> out);

}  // namespace steer::imaging
