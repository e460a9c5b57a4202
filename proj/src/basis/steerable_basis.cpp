#include "steer/basis/steerable_basis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>

#include "steer/error.hpp"

namespace steer::basis {

namespace {

using groups::Matrix;
using groups::Representation;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_odd_size(int kernel_size) {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "kernel size must be odd and positive, got " + std::to_string(kernel_size));
  }
}

// Orbits of the generator action, each listed so that g . orbit[j] = orbit[j + 1].
std::vector<std::vector<int>> generator_orbits(const KernelGrid& grid) {
  const auto& gen = grid.action[grid.order > 1 ? 1 : 0];
  std::vector<bool> seen(grid.size(), false);
  std::vector<std::vector<int>> orbits;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (seen[s]) continue;
    std::vector<int> orbit;
    int cur = static_cast<int>(s);
    while (!seen[cur]) {
      seen[cur] = true;
      orbit.push_back(cur);
      cur = gen[cur];
    }
    orbits.push_back(std::move(orbit));
  }
  return orbits;
}

// rho_out(g) K rho_in(g)^T in row-major vec form is kron(rho_out, rho_in)(g).
Matrix vec_action(const Representation& rep_in, const Representation& rep_out, int index) {
  const Matrix& a = rep_out.matrix(index);
  const Matrix& b = rep_in.matrix(index);
  Matrix m(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) m.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return m;
}

}  // namespace

KernelGrid polar_grid(int kernel_size, int order) { return polar_grid(kernel_size, order, 8 * order); }

KernelGrid polar_grid(int kernel_size, int order, int angular_samples) {
  require_odd_size(kernel_size);
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "group order must be >= 1");
  if (angular_samples < order || angular_samples % order != 0) {
    throw Error(ErrorKind::InvalidArgument, "angular sample count " + std::to_string(angular_samples) +
                                                " must be a positive multiple of the group order");
  }
  KernelGrid grid;
  grid.kind = GridKind::Polar;
  grid.kernel_size = kernel_size;
  grid.order = order;
  grid.angular_samples = angular_samples;
  grid.samples.push_back({0.0, 0.0, 0, 0});
  for (int ring = 1; ring <= grid.rings(); ++ring) {
    for (int a = 0; a < angular_samples; ++a) {
      const double phi = 2.0 * std::numbers::pi * a / angular_samples;
      grid.samples.push_back({ring * std::cos(phi), ring * std::sin(phi), ring, a});
    }
  }
  const int shift = angular_samples / order;
  grid.action.assign(order, std::vector<int>(grid.size()));
  for (int k = 0; k < order; ++k) {
    grid.action[k][0] = 0;
    for (std::size_t s = 1; s < grid.size(); ++s) {
      const auto& smp = grid.samples[s];
      const int a = (smp.angle_index + k * shift) % angular_samples;
      grid.action[k][s] = 1 + (smp.ring - 1) * angular_samples + a;
    }
  }
  return grid;
}

KernelGrid cartesian_grid(int kernel_size, int order) {
  require_odd_size(kernel_size);
  if (order < 1 || 4 % order != 0) {
    throw Error(ErrorKind::InvalidArgument, "cartesian grids need a group order dividing 4, got " + std::to_string(order));
  }
  KernelGrid grid;
  grid.kind = GridKind::Cartesian;
  grid.kernel_size = kernel_size;
  grid.order = order;
  const int c = kernel_size / 2;
  for (int ky = 0; ky < kernel_size; ++ky)
    for (int kx = 0; kx < kernel_size; ++kx) grid.samples.push_back({double(kx - c), double(ky - c), 0, 0});
  grid.action.assign(order, std::vector<int>(grid.size()));
  for (int k = 0; k < order; ++k) {
    const int quarter = (4 * k / order) % 4;
    for (int ky = 0; ky < kernel_size; ++ky)
      for (int kx = 0; kx < kernel_size; ++kx) {
        int x = kx - c, y = ky - c;
        for (int q = 0; q < quarter; ++q) std::tie(x, y) = std::make_tuple(-y, x);
        grid.action[k][ky * kernel_size + kx] = (y + c) * kernel_size + (x + c);
      }
  }
  return grid;
}

KernelBasis::KernelBasis(Representation rep_in, Representation rep_out, KernelGrid grid, Eigen::MatrixXd polar,
                         Eigen::MatrixXd cartesian, std::vector<double> singular_values)
    : rep_in_(std::move(rep_in)),
      rep_out_(std::move(rep_out)),
      grid_(std::move(grid)),
      polar_(std::move(polar)),
      cartesian_(std::move(cartesian)),
      singular_values_(std::move(singular_values)) {
  if (cartesian_.cols() != polar_.cols()) {
    throw Error(ErrorKind::ShapeMismatch, "cartesian stack and polar basis disagree on the element count");
  }
  degenerate_.resize(size());
  for (std::size_t r = 0; r < size(); ++r) {
    degenerate_[r] = cartesian_.col(static_cast<Eigen::Index>(r)).isZero(0.0);
    if (!degenerate_[r]) effective_.push_back(r);
  }
  effective_cartesian_.resize(cartesian_.rows(), static_cast<Eigen::Index>(effective_.size()));
  for (std::size_t j = 0; j < effective_.size(); ++j)
    effective_cartesian_.col(static_cast<Eigen::Index>(j)) = cartesian_.col(static_cast<Eigen::Index>(effective_[j]));
}

Eigen::MatrixXd cartesian_sampling_matrix(const KernelGrid& grid, int kernel_size, const SamplingOptions& options) {
  if (kernel_size != grid.kernel_size) {
    throw Error(ErrorKind::InvalidArgument, "kernel size " + std::to_string(kernel_size) +
                                                " does not match the grid's " + std::to_string(grid.kernel_size));
  }
  const int s = kernel_size, c = s / 2;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(s * s, static_cast<Eigen::Index>(grid.size()));
  if (grid.kind == GridKind::Cartesian) {
    w.setIdentity();
    return w;
  }
  const double two_var = 2.0 * options.sigma * options.sigma;
  for (int ky = 0; ky < s; ++ky) {
    for (int kx = 0; kx < s; ++kx) {
      const int p = ky * s + kx;
      const double px = kx - c, py = ky - c;
      const double rp = std::hypot(px, py);
      w(p, 0) = std::exp(-rp * rp / two_var);
      for (int ring = 1; ring <= grid.rings(); ++ring) {
        const double radial = std::exp(-(rp - ring) * (rp - ring) / two_var);
        const std::size_t first = 1 + static_cast<std::size_t>(ring - 1) * grid.angular_samples;
        double total = 0.0;
        for (int a = 0; a < grid.angular_samples; ++a) {
          const auto& smp = grid.samples[first + a];
          const double d2 = (px - smp.x) * (px - smp.x) + (py - smp.y) * (py - smp.y);
          total += (w(p, static_cast<Eigen::Index>(first + a)) = std::exp(-d2 / two_var));
        }
        for (int a = 0; a < grid.angular_samples; ++a) w(p, static_cast<Eigen::Index>(first + a)) *= radial / total;
      }
    }
  }
  return w;
}

namespace {

// Unnormalised Cartesian samples, one column per polar column.
Eigen::MatrixXd sample_columns(const Eigen::MatrixXd& polar, const Eigen::MatrixXd& sampling, int d) {
  const Eigen::Index pixels = sampling.rows();
  const Eigen::Index samples = sampling.cols();
  Eigen::MatrixXd out(pixels * d, polar.cols());
  for (Eigen::Index r = 0; r < polar.cols(); ++r) {
    Eigen::Map<const RowMatrix> grid_values(polar.col(r).data(), samples, d);
    const RowMatrix pix = sampling * grid_values;  // [pixel][pair]
    for (int pair = 0; pair < d; ++pair) out.col(r).segment(pair * pixels, pixels) = pix.col(pair);
  }
  return out;
}

Eigen::MatrixXd normalise_columns(Eigen::MatrixXd cart, double tolerance) {
  double largest = 0.0;
  for (Eigen::Index r = 0; r < cart.cols(); ++r) largest = std::max(largest, cart.col(r).norm());
  for (Eigen::Index r = 0; r < cart.cols(); ++r) {
    const double n = cart.col(r).norm();
    if (n <= tolerance * largest || n == 0.0) cart.col(r).setZero();
    else cart.col(r) /= n;
  }
  return cart;
}

}  // namespace

KernelBasis solve_basis_nullspace(const Representation& rep_in, const Representation& rep_out, const KernelGrid& grid,
                                  const SolverOptions& solver, const SamplingOptions& sampling) {
  if (rep_in.order() != grid.order || rep_out.order() != grid.order) {
    throw Error(ErrorKind::InvalidArgument, "representations and grid must share the group order");
  }
  const int d = rep_in.dim() * rep_out.dim();
  const std::size_t unknowns = grid.size() * static_cast<std::size_t>(d);
  if (unknowns > solver.max_unknowns) {
    throw Error(ErrorKind::DimensionOverflow, "steerability system has " + std::to_string(unknowns) +
                                                  " unknowns, above the cap of " + std::to_string(solver.max_unknowns));
  }

  const Matrix action = vec_action(rep_in, rep_out, grid.order > 1 ? 1 : 0);
  const auto orbits = generator_orbits(grid);

  struct Block {
    const std::vector<int>* orbit;
    Eigen::VectorXd sigma;
    Eigen::MatrixXd v;
  };
  std::vector<Block> blocks;
  std::vector<double> singular_values;
  double sigma_max = 0.0;
  for (const auto& orbit : orbits) {
    const Eigen::Index len = static_cast<Eigen::Index>(orbit.size());
    // Rows j: k(orbit[j+1]) - R k(orbit[j]) = 0 (cyclically).
    Eigen::MatrixXd system = Eigen::MatrixXd::Zero(len * d, len * d);
    for (Eigen::Index j = 0; j < len; ++j) {
      const Eigen::Index next = (j + 1) % len;
      system.block(j * d, next * d, d, d) += Matrix::Identity(d, d);
      system.block(j * d, j * d, d, d) -= action;
    }
    Eigen::BDCSVD<Eigen::MatrixXd> svd(system, Eigen::ComputeFullV);
    Block b{&orbit, svd.singularValues(), svd.matrixV()};
    if (b.sigma.size() > 0) sigma_max = std::max(sigma_max, b.sigma.maxCoeff());
    for (Eigen::Index i = 0; i < b.sigma.size(); ++i) singular_values.push_back(b.sigma(i));
    blocks.push_back(std::move(b));
  }
  std::sort(singular_values.begin(), singular_values.end(), std::greater<>());

  const double cutoff = solver.threshold * sigma_max;
  std::vector<Eigen::VectorXd> null_vectors;
  for (const auto& b : blocks) {
    const auto& orbit = *b.orbit;
    for (Eigen::Index i = 0; i < b.sigma.size(); ++i) {
      if (b.sigma(i) > cutoff) continue;
      Eigen::VectorXd full = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(unknowns));
      for (std::size_t j = 0; j < orbit.size(); ++j)
        full.segment(static_cast<Eigen::Index>(orbit[j]) * d, d) = b.v.col(i).segment(static_cast<Eigen::Index>(j) * d, d);
      null_vectors.push_back(std::move(full));
    }
  }
  Eigen::MatrixXd polar(static_cast<Eigen::Index>(unknowns), static_cast<Eigen::Index>(null_vectors.size()));
  for (std::size_t r = 0; r < null_vectors.size(); ++r) polar.col(static_cast<Eigen::Index>(r)) = null_vectors[r];

  // Rotate within the null space so Cartesian samples are orthogonal and sorted by energy.
  const Eigen::MatrixXd w = cartesian_sampling_matrix(grid, grid.kernel_size, sampling);
  if (polar.cols() > 0) {
    const Eigen::MatrixXd cart = sample_columns(polar, w, d);
    const Eigen::MatrixXd gram = cart.transpose() * cart;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
    const Eigen::Index b = gram.cols();
    Eigen::MatrixXd q(b, b);
    for (Eigen::Index j = 0; j < b; ++j) {
      Eigen::VectorXd col = eig.eigenvectors().col(b - 1 - j);
      Eigen::Index arg;
      col.cwiseAbs().maxCoeff(&arg);
      if (col(arg) < 0) col = -col;
      q.col(j) = col;
    }
    polar = polar * q;
  }

  Eigen::MatrixXd cart = normalise_columns(sample_columns(polar, w, d), sampling.bandlimit);
  return KernelBasis(rep_in, rep_out, grid, std::move(polar), std::move(cart), std::move(singular_values));
}

double steerability_residual(const Representation& rep_in, const Representation& rep_out, const KernelGrid& grid,
                             std::span<const double> kernel) {
  const int di = rep_in.dim(), dout = rep_out.dim();
  if (kernel.size() != grid.size() * static_cast<std::size_t>(di * dout)) {
    throw Error(ErrorKind::ShapeMismatch, "kernel does not match grid and representation sizes");
  }
  double worst = 0.0;
  for (int k = 0; k < grid.order; ++k) {
    const Matrix& ro = rep_out.matrix(k);
    const Matrix ri_inv = rep_in.matrix(k).transpose();
    for (std::size_t s = 0; s < grid.size(); ++s) {
      Eigen::Map<const RowMatrix> kx(kernel.data() + s * dout * di, dout, di);
      Eigen::Map<const RowMatrix> kgx(kernel.data() + static_cast<std::size_t>(grid.action[k][s]) * dout * di, dout, di);
      const Matrix diff = kgx - ro * kx * ri_inv;
      worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

double verify_steerability(const KernelBasis& basis) {
  double worst = 0.0;
  for (Eigen::Index r = 0; r < basis.polar().cols(); ++r) {
    const auto col = basis.polar().col(r);
    worst = std::max(worst, steerability_residual(basis.rep_in(), basis.rep_out(), basis.grid(),
                                                  std::span<const double>(col.data(), static_cast<std::size_t>(col.size()))));
  }
  return worst;
}

double orthonormality_defect(const KernelBasis& basis) {
  if (basis.size() == 0) return 0.0;
  const Eigen::MatrixXd gram = basis.polar().transpose() * basis.polar();
  return (gram - Eigen::MatrixXd::Identity(gram.rows(), gram.cols())).cwiseAbs().maxCoeff();
}

Eigen::MatrixXd sample_basis_cartesian(const KernelBasis& basis, int kernel_size, const SamplingOptions& options) {
  const Eigen::MatrixXd w = cartesian_sampling_matrix(basis.grid(), kernel_size, options);
  return normalise_columns(sample_columns(basis.polar(), w, basis.d_in() * basis.d_out()), options.bandlimit);
}

ad::Tensor expand_kernel(const ad::Tensor& weights, const KernelBasis& basis) {
  if (weights.size() != basis.size()) {
    throw Error(ErrorKind::ShapeMismatch, "expand_kernel: " + std::to_string(weights.size()) +
                                              " weights for a basis of " + std::to_string(basis.size()));
  }
  const std::size_t s = static_cast<std::size_t>(basis.kernel_size());
  const auto& eff = basis.effective();
  Eigen::VectorXd w(static_cast<Eigen::Index>(eff.size()));
  for (std::size_t j = 0; j < eff.size(); ++j) w(static_cast<Eigen::Index>(j)) = weights.values()[eff[j]];
  std::vector<double> out(static_cast<std::size_t>(basis.effective_cartesian_.rows()), 0.0);
  if (!eff.empty()) Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = basis.effective_cartesian_ * w;

  // The basis outlives the graph: layers hold it through the shared cache.
  const KernelBasis* b = &basis;
  return ad::Tensor::make_op(
      "expand_kernel",
      {static_cast<std::size_t>(basis.d_out()), static_cast<std::size_t>(basis.d_in()), s, s}, std::move(out), {weights},
      [b](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
        const auto& eff = b->effective();
        if (eff.empty()) return;
        Eigen::Map<const Eigen::VectorXd> gv(g.data(), static_cast<Eigen::Index>(g.size()));
        const Eigen::VectorXd gw = b->effective_cartesian_.transpose() * gv;
        for (std::size_t j = 0; j < eff.size(); ++j) (*grad_in[0])[eff[j]] += gw(static_cast<Eigen::Index>(j));
      });
}

std::vector<double> expand_polar(std::span<const double> weights, const KernelBasis& basis) {
  if (weights.size() != basis.size()) throw Error(ErrorKind::ShapeMismatch, "expand_polar: weight count mismatch");
  std::vector<double> out(static_cast<std::size_t>(basis.polar().rows()), 0.0);
  if (basis.size() == 0) return out;
  Eigen::Map<const Eigen::VectorXd> w(weights.data(), static_cast<Eigen::Index>(weights.size()));
  Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size())) = basis.polar() * w;
  return out;
}

std::shared_ptr<const KernelBasis> cached_basis(const Representation& rep_in, const Representation& rep_out,
                                                int kernel_size) {
  using Key = std::tuple<int, std::string, int, std::string, int, int>;
  static std::mutex mutex;
  static std::map<Key, std::shared_ptr<const KernelBasis>> cache;
  const Key key{rep_in.order(), rep_in.name(), rep_in.dim(), rep_out.name(), rep_out.dim(), kernel_size};
  std::lock_guard lock(mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto basis = std::make_shared<const KernelBasis>(
      solve_basis_nullspace(rep_in, rep_out, polar_grid(kernel_size, rep_in.order())));
  cache.emplace(key, basis);
  return basis;
}

}  // namespace steer::basis
