#pragma once

#include <vector>

#include "steer/ad/tensor.hpp"
#include "steer/groups/cyclic.hpp"

namespace steer::nn {

/// Ordered list of feature fields; field k occupies a contiguous block of
/// channels whose width is the dimension of its representation.
class FieldType {
 public:
  FieldType(int order, std::vector<groups::Representation> reps);

  static FieldType trivial(int order, std::size_t count = 1);
  static FieldType regular(int order, std::size_t count);

  int order() const { return order_; }
  const std::vector<groups::Representation>& reps() const { return reps_; }
  std::size_t size() const { return reps_.size(); }
  std::size_t channels() const { return channels_; }
  /// First channel of field k.
  std::size_t offset(std::size_t k) const { return offsets_[k]; }
  std::size_t width(std::size_t k) const { return static_cast<std::size_t>(reps_[k].dim()); }

  bool all_permutation() const;
  std::string describe() const;

  friend bool operator==(const FieldType& a, const FieldType& b);

 private:
  int order_;
  std::vector<groups::Representation> reps_;
  std::vector<std::size_t> offsets_;
  std::size_t channels_ = 0;
};

/// (g . f)(p) = rho(g) f(g^{-1} p) on an [N, C, H, W] tensor with H = W.
/// Multiples of 90 degrees permute pixels exactly; other angles use bilinear
/// interpolation with zeros outside the plane.
ad::Tensor rotate_field(const ad::Tensor& x, const FieldType& field, const groups::GroupElement& g);

}  // namespace steer::nn
