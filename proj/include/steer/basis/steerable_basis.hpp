#pragma once

#include <Eigen/Core>
#include <memory>
#include <span>
#include <vector>

#include "steer/ad/tensor.hpp"
#include "steer/groups/cyclic.hpp"

namespace steer::basis {

enum class GridKind { Polar, Cartesian };

/// Finite set of kernel sample positions closed under the action of C_N.
///
/// Polar grids hold a center sample plus rings at unit radii 1..(s-1)/2 with
/// `angular_samples` points each; as long as the angular count is a multiple
/// of N every group rotation permutes the samples exactly. Cartesian grids
/// are the s x s pixel lattice itself and only support N dividing 4.
struct KernelGrid {
  struct Sample {
    double x = 0.0;
    double y = 0.0;
    int ring = 0;
    int angle_index = 0;
  };

  GridKind kind = GridKind::Polar;
  int kernel_size = 1;
  int order = 1;
  int angular_samples = 0;
  std::vector<Sample> samples;
  /// action[k][s]: index of the sample g_k . s.
  std::vector<std::vector<int>> action;

  std::size_t size() const { return samples.size(); }
  int rings() const { return (kernel_size - 1) / 2; }
};

/// Polar grid with 8N angular samples per ring.
KernelGrid polar_grid(int kernel_size, int order);
KernelGrid polar_grid(int kernel_size, int order, int angular_samples);
/// Pixel lattice grid; valid when 90-degree rotations realise the group (N | 4).
KernelGrid cartesian_grid(int kernel_size, int order);

struct SolverOptions {
  /// Singular values at or below threshold * sigma_max span the null space.
  double threshold = 1e-10;
  /// Guard on the total unknown count (samples * d_out * d_in).
  std::size_t max_unknowns = std::size_t{1} << 20;
};

struct SamplingOptions {
  /// Gaussian width, in units of the ring spacing (one pixel).
  double sigma = 0.6;
  /// Elements whose Cartesian norm falls below this fraction of the largest
  /// are dropped from the s x s expansion. The Gaussian attenuates angular
  /// frequency m on ring r roughly by exp(-(m sigma / r)^2 / 2), so this acts
  /// as an angular bandlimit; 0.2 keeps |m| <= 1 on the unit ring of a 3 x 3
  /// kernel. Unit normalisation would otherwise amplify the aliased tail.
  double bandlimit = 0.2;
};

/// Orthonormal basis of the kernels K: grid -> R^{d_out x d_in} satisfying
/// K(g.x) = rho_out(g) K(x) rho_in(g)^{-1}, together with its Cartesian
/// sampling onto an s x s convolution kernel.
class KernelBasis {
 public:
  KernelBasis(groups::Representation rep_in, groups::Representation rep_out, KernelGrid grid,
              Eigen::MatrixXd polar, Eigen::MatrixXd cartesian, std::vector<double> singular_values);

  const groups::Representation& rep_in() const { return rep_in_; }
  const groups::Representation& rep_out() const { return rep_out_; }
  const KernelGrid& grid() const { return grid_; }
  int kernel_size() const { return grid_.kernel_size; }
  int d_in() const { return rep_in_.dim(); }
  int d_out() const { return rep_out_.dim(); }

  /// Null-space dimension B.
  std::size_t size() const { return static_cast<std::size_t>(polar_.cols()); }

  /// Column r holds element r on the grid, laid out [sample][out][in].
  const Eigen::MatrixXd& polar() const { return polar_; }
  /// Column r holds element r as a [out][in][ky][kx] kernel of unit Frobenius
  /// norm, or all zeros when dropped by the bandlimit.
  const Eigen::MatrixXd& cartesian() const { return cartesian_; }

  /// True for elements dropped from the Cartesian expansion.
  const std::vector<bool>& degenerate() const { return degenerate_; }
  /// Indices of the non-degenerate Cartesian elements, in basis order.
  const std::vector<std::size_t>& effective() const { return effective_; }
  std::size_t effective_size() const { return effective_.size(); }

  /// Singular values of the constraint system, sorted descending.
  const std::vector<double>& singular_values() const { return singular_values_; }

  double polar_value(std::size_t element, std::size_t sample, int out, int in) const {
    return polar_(static_cast<Eigen::Index>((sample * d_out() + out) * d_in() + in), static_cast<Eigen::Index>(element));
  }

 private:
  groups::Representation rep_in_;
  groups::Representation rep_out_;
  KernelGrid grid_;
  Eigen::MatrixXd polar_;
  Eigen::MatrixXd cartesian_;
  Eigen::MatrixXd effective_cartesian_;
  std::vector<bool> degenerate_;
  std::vector<std::size_t> effective_;
  std::vector<double> singular_values_;

  friend ad::Tensor expand_kernel(const ad::Tensor& weights, const KernelBasis& basis);
};

/// Solves the vectorised steerability constraint k(g.x) = (rho_out (x) rho_in)(g) k(x)
/// for the group generator at every sample. The system is block diagonal over
/// the orbits of the grid, so each orbit block is decomposed by SVD
/// separately; all blocks share the global singular-value threshold.
///
/// The returned basis is rotated inside the null space so that its Cartesian
/// samples are mutually orthogonal and sorted by decreasing energy. This keeps
/// the polar basis orthonormal while pushing elements that the s x s lattice
/// cannot represent to the tail, where they sample to (numerically) zero.
KernelBasis solve_basis_nullspace(const groups::Representation& rep_in, const groups::Representation& rep_out,
                                  const KernelGrid& grid, const SolverOptions& solver = {},
                                  const SamplingOptions& sampling = {});

/// max over g, samples and elements of || K(g.x) - rho_out(g) K(x) rho_in(g)^{-1} ||_inf.
double verify_steerability(const KernelBasis& basis);

/// Same residual for a single kernel given on the grid, layout [sample][out][in].
double steerability_residual(const groups::Representation& rep_in, const groups::Representation& rep_out,
                             const KernelGrid& grid, std::span<const double> kernel);

/// Max |G - I| over the Gram matrix of the polar elements.
double orthonormality_defect(const KernelBasis& basis);

/// Linear map taking scalar grid samples to s x s pixels (rows: ky * s + kx).
Eigen::MatrixXd cartesian_sampling_matrix(const KernelGrid& grid, int kernel_size, const SamplingOptions& options = {});

/// Samples each polar element onto the s x s lattice with Gaussian
/// radial/angular interpolation and normalises it to unit Frobenius norm.
/// Elements below the bandlimit stay zero.
Eigen::MatrixXd sample_basis_cartesian(const KernelBasis& basis, int kernel_size, const SamplingOptions& options = {});

/// sum_r w_r * basis_r as a [d_out, d_in, s, s] tensor; differentiable in w.
ad::Tensor expand_kernel(const ad::Tensor& weights, const KernelBasis& basis);

/// sum_r w_r * polar_r, layout [sample][out][in].
std::vector<double> expand_polar(std::span<const double> weights, const KernelBasis& basis);

/// Process-wide cache of polar-grid bases keyed by (rep_in, rep_out, s).
std::shared_ptr<const KernelBasis> cached_basis(const groups::Representation& rep_in,
                                                const groups::Representation& rep_out, int kernel_size);

}  // namespace steer::basis
