#include "steer/imaging/radon.hpp"

#include <cmath>
#include <numbers>

#include "steer/error.hpp"

namespace steer::imaging {

namespace {

constexpr double kGuard = 1.5;

std::size_t leading_count(const ad::Tensor& t, std::size_t rows, std::size_t cols, const char* what) {
  if (t.rank() < 2 || t.dim(t.rank() - 2) != rows || t.dim(t.rank() - 1) != cols) {
    throw Error(ErrorKind::ShapeMismatch, std::string(what) + ": expected trailing dims " + std::to_string(rows) +
                                              "x" + std::to_string(cols) + ", got " + ad::shape_to_string(t.shape()));
  }
  return t.size() / (rows * cols);
}

}  // namespace

void validate(const ImageGrid& grid) {
  if (grid.height == 0 || grid.height != grid.width) {
    throw Error(ErrorKind::Geometry, "tomography grids must be square, got " + std::to_string(grid.height) + "x" +
                                         std::to_string(grid.width));
  }
  if (!(grid.pitch > 0.0)) throw Error(ErrorKind::Geometry, "pixel pitch must be positive");
}

RadonOperator::RadonOperator(ImageGrid grid, std::size_t angles) : grid_(grid), angles_(angles) {
  validate(grid_);
  if (angles_ == 0) angles_ = grid_.height;
  const auto n = static_cast<std::ptrdiff_t>(grid_.width);
  const double c = grid_.center();
  const double r_src = static_cast<double>(grid_.width) / 2.0;
  const double r_dst = r_src - kGuard;

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(angles_ * static_cast<std::size_t>(n * n) * 3);
  for (std::size_t t = 0; t < angles_; ++t) {
    const double th = angle(t);
    const double ct = std::cos(th), st = std::sin(th);
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      for (std::ptrdiff_t j = 0; j < n; ++j) {
        const double x = static_cast<double>(j) - c, y = static_cast<double>(i) - c;
        if (x * x + y * y > r_dst * r_dst) continue;
        // Image rotated by -theta: out(p) = in(R(theta) p).
        const double sx = ct * x - st * y + c;
        const double sy = st * x + ct * y + c;
        const double fx = std::floor(sx), fy = std::floor(sy);
        const double ax = sx - fx, ay = sy - fy;
        const auto x0 = static_cast<std::ptrdiff_t>(fx), y0 = static_cast<std::ptrdiff_t>(fy);
        const auto row = static_cast<Eigen::Index>(t * grid_.width + static_cast<std::size_t>(j));
        const std::ptrdiff_t ys[2] = {y0, y0 + 1}, xs[2] = {x0, x0 + 1};
        const double wy[2] = {1.0 - ay, ay}, wx[2] = {1.0 - ax, ax};
        for (int a = 0; a < 2; ++a)
          for (int b = 0; b < 2; ++b) {
            const double w = wy[a] * wx[b];
            if (w == 0.0 || ys[a] < 0 || ys[a] >= n || xs[b] < 0 || xs[b] >= n) continue;
            if (!in_support(static_cast<std::size_t>(ys[a]), static_cast<std::size_t>(xs[b]))) continue;
            triplets.emplace_back(row, static_cast<Eigen::Index>(ys[a] * n + xs[b]), w);
          }
      }
    }
  }
  auto m = std::make_shared<Matrix>(static_cast<Eigen::Index>(angles_ * grid_.width), static_cast<Eigen::Index>(n * n));
  m->setFromTriplets(triplets.begin(), triplets.end());
  m->makeCompressed();
  matrix_ = std::move(m);

  const std::vector<double> ones(angles_ * grid_.width, 1.0);
  sensitivity_ = adjoint(ones);
}

double RadonOperator::angle(std::size_t t) const {
  return std::numbers::pi * static_cast<double>(t) / static_cast<double>(angles_);
}

bool RadonOperator::in_support(std::size_t row, std::size_t col) const {
  const double c = grid_.center(), r = static_cast<double>(grid_.width) / 2.0;
  const double x = static_cast<double>(col) - c, y = static_cast<double>(row) - c;
  return x * x + y * y <= r * r;
}

void RadonOperator::forward(std::span<const double> image, std::span<double> sinogram) const {
  if (image.size() != static_cast<std::size_t>(matrix_->cols()) ||
      sinogram.size() != static_cast<std::size_t>(matrix_->rows())) {
    throw Error(ErrorKind::ShapeMismatch, "radon forward: buffer sizes do not match the operator");
  }
  Eigen::Map<const Eigen::VectorXd> f(image.data(), matrix_->cols());
  Eigen::Map<Eigen::VectorXd> g(sinogram.data(), matrix_->rows());
  g.noalias() = *matrix_ * f;
}

void RadonOperator::adjoint(std::span<const double> sinogram, std::span<double> image) const {
  if (image.size() != static_cast<std::size_t>(matrix_->cols()) ||
      sinogram.size() != static_cast<std::size_t>(matrix_->rows())) {
    throw Error(ErrorKind::ShapeMismatch, "radon adjoint: buffer sizes do not match the operator");
  }
  Eigen::Map<const Eigen::VectorXd> g(sinogram.data(), matrix_->rows());
  Eigen::Map<Eigen::VectorXd> f(image.data(), matrix_->cols());
  f.noalias() = matrix_->transpose() * g;
}

std::vector<double> RadonOperator::forward(std::span<const double> image) const {
  std::vector<double> out(static_cast<std::size_t>(matrix_->rows()));
  forward(image, out);
  return out;
}

std::vector<double> RadonOperator::adjoint(std::span<const double> sinogram) const {
  std::vector<double> out(static_cast<std::size_t>(matrix_->cols()));
  adjoint(sinogram, out);
  return out;
}

ad::Tensor radon_forward(const RadonOperator& op, const ad::Tensor& image) {
  const std::size_t h = op.grid().height, w = op.grid().width, t = op.angles(), d = op.detectors();
  const std::size_t batch = leading_count(image, h, w, "radon_forward");
  ad::Shape shape = image.shape();
  shape[shape.size() - 2] = t;
  shape[shape.size() - 1] = d;
  std::vector<double> out(batch * t * d);
  auto in = image.values();
  for (std::size_t b = 0; b < batch; ++b) {
    op.forward(in.subspan(b * h * w, h * w), std::span<double>(out).subspan(b * t * d, t * d));
  }
  return ad::Tensor::make_op("radon_forward", std::move(shape), std::move(out), {image},
                             [op, batch, h, w, t, d](std::span<const double> g, std::span<std::vector<double>*> gi) {
                               if (!gi[0]) return;
                               std::vector<double> tmp(h * w);
                               for (std::size_t b = 0; b < batch; ++b) {
                                 op.adjoint(g.subspan(b * t * d, t * d), tmp);
                                 for (std::size_t k = 0; k < h * w; ++k) (*gi[0])[b * h * w + k] += tmp[k];
                               }
                             });
}

ad::Tensor radon_adjoint(const RadonOperator& op, const ad::Tensor& sinogram) {
  const std::size_t h = op.grid().height, w = op.grid().width, t = op.angles(), d = op.detectors();
  const std::size_t batch = leading_count(sinogram, t, d, "radon_adjoint");
  ad::Shape shape = sinogram.shape();
  shape[shape.size() - 2] = h;
  shape[shape.size() - 1] = w;
  std::vector<double> out(batch * h * w);
  auto in = sinogram.values();
  for (std::size_t b = 0; b < batch; ++b) {
    op.adjoint(in.subspan(b * t * d, t * d), std::span<double>(out).subspan(b * h * w, h * w));
  }
  return ad::Tensor::make_op("radon_adjoint", std::move(shape), std::move(out), {sinogram},
                             [op, batch, h, w, t, d](std::span<const double> g, std::span<std::vector<double>*> gi) {
                               if (!gi[0]) return;
                               std::vector<double> tmp(t * d);
                               for (std::size_t b = 0; b < batch; ++b) {
                                 op.forward(g.subspan(b * h * w, h * w), tmp);
                                 for (std::size_t k = 0; k < t * d; ++k) (*gi[0])[b * t * d + k] += tmp[k];
                               }
                             });
}

}  // namespace steer::imaging
