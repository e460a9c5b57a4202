#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace steer::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Receives the upstream gradient of an op's output and accumulates into the
/// gradients of its inputs. `grad_in[i]` is null when input i does not need a
/// gradient.
using BackwardFn =
    std::function<void(std::span<const double> grad_out, std::span<std::vector<double>*> grad_in)>;

namespace detail {

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t sequence = 0;
  std::string op;
  std::vector<std::shared_ptr<Node>> inputs;
  BackwardFn backward;
};

}  // namespace detail

/// Dense row-major tensor of 64-bit reals with optional reverse-mode gradient
/// tracking. Copies share the underlying node; use `detach()` for a deep copy.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t dim(std::size_t axis) const;
  std::size_t rank() const { return shape().size(); }
  std::size_t size() const;

  std::span<const double> values() const;
  /// Mutable access for leaves only (parameters, inputs); throws on op outputs.
  std::span<double> mutable_values();
  double item() const;
  double at(std::size_t flat_index) const { return values()[flat_index]; }

  bool requires_grad() const;
  /// Gradient buffer; zeros when backward has not reached this tensor.
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  const std::string& op() const;
  std::uint64_t sequence() const;

  /// Fresh leaf holding a copy of the values, outside any graph.
  Tensor detach(bool requires_grad = false) const;

  bool same_node(const Tensor& other) const noexcept { return node_ == other.node_; }

  /// Creates the output of a differentiable op. The backward closure is only
  /// retained when at least one input requires a gradient. Non-finite output
  /// values raise `ErrorKind::NonFinite`.
  static Tensor make_op(std::string op, Shape shape, std::vector<double> values,
                        std::vector<Tensor> inputs, BackwardFn backward);

 private:
  explicit Tensor(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  detail::Node& node() const;

  std::shared_ptr<detail::Node> node_;

  friend struct GraphAccess;
};

/// One replayed entry of a backward pass.
struct RecordEntry {
  std::uint64_t sequence;
  std::string op;
  std::vector<std::uint64_t> input_sequences;
};

/// The ordered list of operations visited by a backward pass, in the order
/// their adjoints were applied (reverse topological order).
struct ComputationRecord {
  std::vector<RecordEntry> entries;
};

/// Reverse-mode sweep from a scalar loss. Leaf gradients accumulate, so call
/// `zero_grad` on parameters between steps. Accumulation order is fixed by
/// creation sequence, which makes repeated runs bitwise identical.
ComputationRecord backward(const Tensor& loss);

}  // namespace steer::ad
