#include "steer/groups/cyclic.hpp"

#include <cmath>
#include <numbers>

#include "steer/error.hpp"

namespace steer::groups {

namespace {

void require_order(int order) {
  if (order < 1) throw Error(ErrorKind::InvalidArgument, "group order must be >= 1, got " + std::to_string(order));
}

int wrap(int index, int order) { return ((index % order) + order) % order; }

}  // namespace

GroupElement::GroupElement(int order, int index) : order_(order), index_(0) {
  require_order(order);
  index_ = wrap(index, order);
}

double GroupElement::angle() const { return 2.0 * std::numbers::pi * index_ / order_; }

GroupElement GroupElement::compose(const GroupElement& other) const {
  if (other.order_ != order_) throw Error(ErrorKind::InvalidArgument, "composing elements of different groups");
  return {order_, index_ + other.index_};
}

GroupElement GroupElement::inverse() const { return {order_, order_ - index_}; }

Matrix irrep_matrix(int order, int frequency, int index) {
  require_order(order);
  if (frequency < 0 || frequency > order / 2) {
    throw Error(ErrorKind::InvalidArgument, "irrep frequency " + std::to_string(frequency) + " out of range for C_" +
                                                std::to_string(order));
  }
  const int k = wrap(index, order);
  if (frequency == 0) return Matrix::Ones(1, 1);
  if (2 * frequency == order) return Matrix::Constant(1, 1, k % 2 == 0 ? 1.0 : -1.0);
  // Reduce the angle index first so that exact multiples of pi/2 come out exact.
  const int step = (frequency * k) % order;
  double c, s;
  if ((4 * step) % order == 0) {
    static constexpr double kCos[] = {1.0, 0.0, -1.0, 0.0};
    static constexpr double kSin[] = {0.0, 1.0, 0.0, -1.0};
    const int q = 4 * step / order;
    c = kCos[q];
    s = kSin[q];
  } else {
    const double theta = 2.0 * std::numbers::pi * step / order;
    c = std::cos(theta);
    s = std::sin(theta);
  }
  Matrix m(2, 2);
  m << c, -s, s, c;
  return m;
}

Matrix regular_matrix(int order, int index) {
  require_order(order);
  const int k = wrap(index, order);
  Matrix m = Matrix::Zero(order, order);
  for (int i = 0; i < order; ++i) m((i + k) % order, i) = 1.0;
  return m;
}

struct Representation::Impl {
  int order = 1;
  int dim = 1;
  RepKind kind = RepKind::Trivial;
  int frequency = 0;
  std::string name;
  std::vector<Representation> children;
  std::vector<Matrix> table;
};

Representation Representation::trivial(int order) {
  require_order(order);
  auto impl = std::make_shared<Impl>();
  impl->order = order;
  impl->dim = 1;
  impl->kind = RepKind::Trivial;
  impl->name = "trivial";
  impl->table.assign(order, Matrix::Ones(1, 1));
  return Representation(std::move(impl));
}

Representation Representation::irrep(int order, int frequency) {
  auto impl = std::make_shared<Impl>();
  impl->order = order;
  impl->kind = RepKind::Irrep;
  impl->frequency = frequency;
  impl->name = "irrep(" + std::to_string(frequency) + ")";
  for (int k = 0; k < order; ++k) impl->table.push_back(irrep_matrix(order, frequency, k));
  impl->dim = static_cast<int>(impl->table.front().rows());
  return Representation(std::move(impl));
}

Representation Representation::regular(int order) {
  require_order(order);
  auto impl = std::make_shared<Impl>();
  impl->order = order;
  impl->dim = order;
  impl->kind = RepKind::Regular;
  impl->name = "regular";
  for (int k = 0; k < order; ++k) impl->table.push_back(regular_matrix(order, k));
  return Representation(std::move(impl));
}

Representation Representation::from_table(int order, std::vector<Matrix> table, std::string name) {
  require_order(order);
  if (static_cast<int>(table.size()) != order) {
    throw Error(ErrorKind::InvalidArgument, "representation table needs one matrix per group element");
  }
  const auto d = table.front().rows();
  for (const auto& m : table) {
    if (m.rows() != d || m.cols() != d) throw Error(ErrorKind::ShapeMismatch, "representation matrices must be d x d");
  }
  auto impl = std::make_shared<Impl>();
  impl->order = order;
  impl->dim = static_cast<int>(d);
  impl->kind = RepKind::Table;
  impl->name = std::move(name);
  impl->table = std::move(table);
  return Representation(std::move(impl));
}

int Representation::order() const { return impl_->order; }
int Representation::dim() const { return impl_->dim; }
RepKind Representation::kind() const { return impl_->kind; }
int Representation::frequency() const { return impl_->frequency; }
const std::string& Representation::name() const { return impl_->name; }
const std::vector<Representation>& Representation::children() const { return impl_->children; }

const Matrix& Representation::matrix(int index) const { return impl_->table[wrap(index, impl_->order)]; }

bool Representation::is_permutation() const {
  for (const auto& m : impl_->table) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      int ones = 0;
      for (Eigen::Index c = 0; c < m.cols(); ++c) {
        if (m(r, c) == 1.0) ++ones;
        else if (m(r, c) != 0.0) return false;
      }
      if (ones != 1) return false;
    }
  }
  return true;
}

Representation kron_rep(const Representation& a, const Representation& b) {
  if (a.order() != b.order()) throw Error(ErrorKind::InvalidArgument, "kron_rep: group orders differ");
  auto impl = std::make_shared<Representation::Impl>();
  impl->order = a.order();
  impl->dim = a.dim() * b.dim();
  impl->kind = RepKind::Kronecker;
  impl->name = "kron(" + a.name() + "," + b.name() + ")";
  impl->children = {a, b};
  for (int k = 0; k < a.order(); ++k) {
    const Matrix& ma = a.matrix(k);
    const Matrix& mb = b.matrix(k);
    Matrix m(impl->dim, impl->dim);
    for (Eigen::Index i = 0; i < ma.rows(); ++i)
      for (Eigen::Index j = 0; j < ma.cols(); ++j)
        m.block(i * mb.rows(), j * mb.cols(), mb.rows(), mb.cols()) = ma(i, j) * mb;
    impl->table.push_back(std::move(m));
  }
  return Representation(std::move(impl));
}

Representation direct_sum_rep(const std::vector<Representation>& reps) {
  if (reps.empty()) throw Error(ErrorKind::InvalidArgument, "direct_sum_rep: empty list");
  auto impl = std::make_shared<Representation::Impl>();
  impl->order = reps.front().order();
  impl->kind = RepKind::DirectSum;
  impl->children = reps;
  impl->dim = 0;
  impl->name = "sum(";
  for (std::size_t i = 0; i < reps.size(); ++i) {
    if (reps[i].order() != impl->order) throw Error(ErrorKind::InvalidArgument, "direct_sum_rep: group orders differ");
    impl->dim += reps[i].dim();
    impl->name += (i ? "," : "") + reps[i].name();
  }
  impl->name += ")";
  for (int k = 0; k < impl->order; ++k) {
    Matrix m = Matrix::Zero(impl->dim, impl->dim);
    int offset = 0;
    for (const auto& r : reps) {
      m.block(offset, offset, r.dim(), r.dim()) = r.matrix(k);
      offset += r.dim();
    }
    impl->table.push_back(std::move(m));
  }
  return Representation(std::move(impl));
}

double verify_homomorphism(const Representation& rep) {
  const int n = rep.order();
  double worst = 0.0;
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Matrix diff = rep.matrix(a) * rep.matrix(b) - rep.matrix(a + b);
      worst = std::max(worst, diff.cwiseAbs().maxCoeff());
    }
  return worst;
}

double verify_orthogonality(const Representation& rep) {
  double worst = 0.0;
  for (int k = 0; k < rep.order(); ++k) {
    const Matrix& m = rep.matrix(k);
    const Matrix diff = m.transpose() * m - Matrix::Identity(m.rows(), m.cols());
    worst = std::max(worst, diff.cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace steer::groups
