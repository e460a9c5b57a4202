#pragma once

#include <cstdint>
#include <vector>

#include "steer/ad/tensor.hpp"
#include "steer/imaging/radon.hpp"

namespace steer::imaging {

/// Hot-rod resolution phantom parameters. Lengths are in millimetres.
struct PhantomSpec {
  std::vector<double> rod_diameters = {6.5, 5.5, 4.5, 3.5, 2.2, 1.6};
  double hot_ratio = 10.0;
  double background = 1.0;
  double cold_diameter = 30.0;
  /// Phantom disk diameter as a fraction of the field of view.
  double body_fraction = 0.9;
  /// Rod center spacing as a multiple of the rod diameter.
  double spacing_factor = 2.0;
  /// Clearance between rods and the cold region, sector edges or body edge.
  double margin = 0.5;
  /// Supersampling per axis; 1 renders the piecewise-constant phantom.
  int anti_alias = 1;
};

/// Throws `ErrorKind::InvalidArgument` for non-positive or non-descending
/// diameters, or a ratio not above 1.
void validate(const PhantomSpec& spec);

struct Rod {
  double x = 0.0;
  double y = 0.0;
  double diameter = 0.0;
  int sector = 0;
};

/// Rod positions in millimetres relative to the image center, y pointing
/// up the rows (toward row 0).
struct DerenzoLayout {
  double body_radius = 0.0;
  double cold_radius = 0.0;
  std::vector<Rod> rods;

  std::vector<Rod> sector(int index) const;
};

/// Six 60-degree sectors, one diameter each, packed as triangles with the
/// apex toward the center. Throws `ErrorKind::Geometry` naming the diameter
/// of the first sector that cannot hold a single rod.
DerenzoLayout derenzo_layout(const ImageGrid& grid, const PhantomSpec& spec);

ad::Tensor derenzo_phantom(const ImageGrid& grid, const PhantomSpec& spec);
ad::Tensor render_derenzo(const ImageGrid& grid, const PhantomSpec& spec, const DerenzoLayout& layout);

/// Per-sector contrast recovery (mean_rod / mean_bg - 1) / (ratio - 1).
/// Rod pixels lie within half a radius of a rod center; background pixels
/// sit inside the body at least two pixels away from every rod, the cold
/// region and the body edge.
std::vector<double> contrast_recovery(const ad::Tensor& image, const ImageGrid& grid, const PhantomSpec& spec,
                                      const DerenzoLayout& layout);

/// Modified Shepp-Logan head phantom scaled to the inscribed disk and
/// clamped to [0, 1]. Left and right ventricles differ in size.
ad::Tensor brain_phantom(const ImageGrid& grid);

/// Poisson(image * counts) / counts per pixel, seeded. Negative pixels throw.
ad::Tensor add_poisson_noise(const ad::Tensor& image, double counts_per_unit, std::uint64_t seed);

}  // namespace steer::imaging
