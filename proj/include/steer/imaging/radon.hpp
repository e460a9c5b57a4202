#pragma once

#include <Eigen/SparseCore>
#include <memory>
#include <span>
#include <vector>

#include "steer/ad/tensor.hpp"

namespace steer::imaging {

struct ImageGrid {
  std::size_t height = 64;
  std::size_t width = 64;
  /// Millimetres per pixel.
  double pitch = 0.8;

  double center() const { return (static_cast<double>(height) - 1.0) / 2.0; }
  double fov_mm() const { return static_cast<double>(width) * pitch; }
};

/// Throws `ErrorKind::Geometry` unless the grid is square with positive pitch.
void validate(const ImageGrid& grid);

/// Parallel-beam projector built by rotate-and-sum.
///
/// For angle theta_t = pi t / T the image is rotated by -theta_t about its
/// center with bilinear interpolation and the columns are summed into the
/// D = W detector bins. Source pixels outside the inscribed disk (radius H/2)
/// are masked; destination samples are read only within radius H/2 - 1.5 so
/// that every bilinear neighbour lies inside the source disk.
/// The operator is assembled once as a sparse matrix; the adjoint is its
/// exact transpose.
class RadonOperator {
 public:
  explicit RadonOperator(ImageGrid grid, std::size_t angles = 0);

  const ImageGrid& grid() const { return grid_; }
  std::size_t angles() const { return angles_; }
  std::size_t detectors() const { return grid_.width; }
  double angle(std::size_t t) const;

  /// [H*W] -> [T*D].
  void forward(std::span<const double> image, std::span<double> sinogram) const;
  /// [T*D] -> [H*W].
  void adjoint(std::span<const double> sinogram, std::span<double> image) const;

  std::vector<double> forward(std::span<const double> image) const;
  std::vector<double> adjoint(std::span<const double> sinogram) const;

  /// A^T 1, the per-pixel sensitivity.
  const std::vector<double>& sensitivity() const { return sensitivity_; }

  /// Whether pixel (row, col) survives the source mask.
  bool in_support(std::size_t row, std::size_t col) const;

  using Matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
  const Matrix& matrix() const { return *matrix_; }

 private:
  ImageGrid grid_;
  std::size_t angles_;
  std::shared_ptr<const Matrix> matrix_;
  std::vector<double> sensitivity_;
};

/// Differentiable projection of a [..., H, W] tensor to [..., T, D].
ad::Tensor radon_forward(const RadonOperator& op, const ad::Tensor& image);
/// Adjoint of `radon_forward`, [..., T, D] -> [..., H, W].
ad::Tensor radon_adjoint(const RadonOperator& op, const ad::Tensor& sinogram);

}  // namespace steer::imaging
