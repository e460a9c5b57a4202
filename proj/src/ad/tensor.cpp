#include "steer/ad/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "steer/error.hpp"

namespace steer::ad {

namespace {

std::atomic<std::uint64_t> g_sequence{1};

std::shared_ptr<detail::Node> make_leaf(Shape shape, std::vector<double> values, bool requires_grad) {
  for (auto extent : shape) {
    if (extent == 0) {
      throw Error(ErrorKind::InvalidArgument, "tensor extents must be positive: " + shape_to_string(shape));
    }
  }
  if (values.size() != shape_size(shape)) {
    throw Error(ErrorKind::ShapeMismatch, "value count " + std::to_string(values.size()) +
                                              " does not match shape " + shape_to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->requires_grad = requires_grad;
  node->sequence = g_sequence.fetch_add(1);
  node->op = "leaf";
  return node;
}

void ensure_grad(detail::Node& node) {
  if (node.grad.size() != node.value.size()) node.grad.assign(node.value.size(), 0.0);
}

}  // namespace

struct GraphAccess {
  static const std::shared_ptr<detail::Node>& node(const Tensor& t) { return t.node_; }
};

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto extent : shape) n *= extent;
  return n;
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, 0.0), requires_grad));
}

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  auto n = shape_size(shape);
  return Tensor(make_leaf(std::move(shape), std::vector<double>(n, value), requires_grad));
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite value in tensor data");
  }
  return Tensor(make_leaf(std::move(shape), std::move(values), requires_grad));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

detail::Node& Tensor::node() const {
  if (!node_) throw Error(ErrorKind::InvalidArgument, "use of an undefined tensor");
  return *node_;
}

const Shape& Tensor::shape() const { return node().shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) throw Error(ErrorKind::ShapeMismatch, "axis out of range for " + shape_to_string(s));
  return s[axis];
}

std::size_t Tensor::size() const { return node().value.size(); }

std::span<const double> Tensor::values() const { return node().value; }

std::span<double> Tensor::mutable_values() {
  auto& n = node();
  if (n.op != "leaf") throw Error(ErrorKind::InvalidArgument, "only leaf tensors may be mutated");
  return n.value;
}

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorKind::ShapeMismatch, "item() on non-scalar " + shape_to_string(shape()));
  return node().value[0];
}

bool Tensor::requires_grad() const { return node().requires_grad; }

std::span<const double> Tensor::grad() const {
  auto& n = node();
  ensure_grad(n);
  return n.grad;
}

std::span<double> Tensor::mutable_grad() {
  auto& n = node();
  ensure_grad(n);
  return n.grad;
}

void Tensor::zero_grad() {
  auto& n = node();
  n.grad.assign(n.value.size(), 0.0);
}

const std::string& Tensor::op() const { return node().op; }

std::uint64_t Tensor::sequence() const { return node().sequence; }

Tensor Tensor::detach(bool requires_grad) const {
  auto& n = node();
  return Tensor(make_leaf(n.shape, n.value, requires_grad));
}

Tensor Tensor::make_op(std::string op, Shape shape, std::vector<double> values, std::vector<Tensor> inputs,
                       BackwardFn backward) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorKind::NonFinite, "non-finite value produced by op '" + op + "'");
  }
  if (values.size() != shape_size(shape)) {
    throw Error(ErrorKind::ShapeMismatch, "op '" + op + "' produced " + std::to_string(values.size()) +
                                              " values for shape " + shape_to_string(shape));
  }
  auto node = std::make_shared<detail::Node>();
  node->shape = std::move(shape);
  node->value = std::move(values);
  node->sequence = g_sequence.fetch_add(1);
  node->op = std::move(op);
  for (const auto& in : inputs) node->requires_grad = node->requires_grad || in.requires_grad();
  if (node->requires_grad) {
    node->inputs.reserve(inputs.size());
    for (auto& in : inputs) node->inputs.push_back(in.node_);
    node->backward = std::move(backward);
  }
  return Tensor(std::move(node));
}

ComputationRecord backward(const Tensor& loss) {
  const auto& root = GraphAccess::node(loss);
  if (!root) throw Error(ErrorKind::InvalidArgument, "backward on undefined tensor");
  if (root->value.size() != 1) {
    throw Error(ErrorKind::ShapeMismatch, "backward requires a scalar loss, got " + shape_to_string(root->shape));
  }

  // Collect grad-requiring ancestors.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root.get()};
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    if (!n->requires_grad || !seen.insert(n).second) continue;
    order.push_back(n);
    for (auto& in : n->inputs) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(),
            [](const detail::Node* a, const detail::Node* b) { return a->sequence > b->sequence; });

  // Intermediate gradients start from zero on every sweep; leaves accumulate.
  for (auto* n : order) {
    if (n->backward) n->grad.assign(n->value.size(), 0.0);
    else ensure_grad(*n);
  }
  if (root->requires_grad) root->grad[0] += 1.0;

  ComputationRecord record;
  for (auto* n : order) {
    RecordEntry entry{n->sequence, n->op, {}};
    for (auto& in : n->inputs) entry.input_sequences.push_back(in->sequence);
    record.entries.push_back(std::move(entry));
    if (!n->backward) continue;
    std::vector<std::vector<double>*> grads(n->inputs.size(), nullptr);
    for (std::size_t i = 0; i < n->inputs.size(); ++i) {
      if (n->inputs[i]->requires_grad) grads[i] = &n->inputs[i]->grad;
    }
    n->backward(n->grad, grads);
  }
  return record;
}

}  // namespace steer::ad
