#pragma once

#include <Eigen/Core>
#include <memory>
#include <string>
#include <vector>

namespace steer::groups {

using Matrix = Eigen::MatrixXd;

/// Rotation by 2*pi*index/order in the cyclic group C_order.
class GroupElement {
 public:
  GroupElement(int order, int index);

  int order() const noexcept { return order_; }
  int index() const noexcept { return index_; }
  double angle() const;
  bool is_identity() const noexcept { return index_ == 0; }

  GroupElement compose(const GroupElement& other) const;
  GroupElement inverse() const;
  /// Number of quarter turns when the rotation is a multiple of 90 degrees.
  bool is_quarter_turn() const noexcept { return (4 * index_) % order_ == 0; }
  int quarter_turns() const noexcept { return (4 * index_ / order_) % 4; }

  static GroupElement identity(int order) { return {order, 0}; }
  static GroupElement generator(int order) { return {order, order > 1 ? 1 : 0}; }

  friend bool operator==(const GroupElement&, const GroupElement&) = default;

 private:
  int order_;
  int index_;
};

/// 2-D real irrep of frequency m (1-D for m = 0 and m = N/2).
Matrix irrep_matrix(int order, int frequency, int index);
/// Cyclic shift sending e_i to e_{(i + index) mod order}.
Matrix regular_matrix(int order, int index);

enum class RepKind { Trivial, Irrep, Regular, DirectSum, Kronecker, Table };

/// Real orthogonal representation of C_N. The full matrix table is built at
/// construction; instances are immutable and cheap to copy.
class Representation {
 public:
  static Representation trivial(int order);
  static Representation irrep(int order, int frequency);
  static Representation regular(int order);
  /// Explicit table of `order` matrices; used for fixtures and custom reps.
  /// No homomorphism check is made.
  static Representation from_table(int order, std::vector<Matrix> table, std::string name = "table");

  int order() const;
  int dim() const;
  RepKind kind() const;
  int frequency() const;
  const std::string& name() const;
  const std::vector<Representation>& children() const;

  const Matrix& matrix(int index) const;
  const Matrix& matrix(const GroupElement& g) const { return matrix(g.index()); }

  bool is_trivial() const { return kind() == RepKind::Trivial; }
  /// True when every matrix is a permutation matrix (pointwise nonlinearities commute).
  bool is_permutation() const;

 private:
  struct Impl;
  explicit Representation(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}
  std::shared_ptr<const Impl> impl_;

  friend Representation kron_rep(const Representation& a, const Representation& b);
  friend Representation direct_sum_rep(const std::vector<Representation>& reps);
};

/// matrix(g) = a(g) (x) b(g).
Representation kron_rep(const Representation& a, const Representation& b);
/// Block-diagonal stack of the children.
Representation direct_sum_rep(const std::vector<Representation>& reps);

/// max over all (g1, g2) of || rho(g1) rho(g2) - rho(g1 g2) ||_inf (entrywise).
double verify_homomorphism(const Representation& rep);
/// max over g of || rho(g)^T rho(g) - I ||_inf (entrywise).
double verify_orthogonality(const Representation& rep);

}  // namespace steer::groups
