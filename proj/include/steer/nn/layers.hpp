#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "steer/ad/tensor.hpp"
#include "steer/basis/steerable_basis.hpp"
#include "steer/nn/field.hpp"

namespace steer::nn {

struct NamedParameter {
  std::string name;
  ad::Tensor tensor;
};

class Layer {
 public:
  virtual ~Layer() = default;
  virtual ad::Tensor forward(const ad::Tensor& x) const = 0;
  virtual std::vector<NamedParameter> parameters() const { return {}; }
  virtual std::string kind() const = 0;
  virtual std::size_t in_channels() const = 0;
  virtual std::size_t out_channels() const = 0;
};

/// Convolution whose kernel is expanded from steerable basis coefficients,
/// one coefficient vector per (output field, input field) pair. Optional
/// bias: one scalar per trivial output field.
class SteerableConv final : public Layer {
 public:
  SteerableConv(FieldType in, FieldType out, int kernel_size, bool bias, std::mt19937_64& rng);

  ad::Tensor forward(const ad::Tensor& x) const override;
  std::vector<NamedParameter> parameters() const override;
  std::string kind() const override { return "steerable_conv"; }
  std::size_t in_channels() const override { return in_.channels(); }
  std::size_t out_channels() const override { return out_.channels(); }

  const FieldType& in_field() const { return in_; }
  const FieldType& out_field() const { return out_; }
  int kernel_size() const { return kernel_size_; }

  /// Coefficients of pair (out field o, in field i).
  const ad::Tensor& weight(std::size_t o, std::size_t i) const { return weights_[o * in_.size() + i]; }
  const basis::KernelBasis& pair_basis(std::size_t o, std::size_t i) const { return *bases_[o * in_.size() + i]; }
  /// Full [Cout, Cin, s, s] kernel for the current coefficients (differentiable).
  ad::Tensor kernel() const;

 private:
  FieldType in_;
  FieldType out_;
  int kernel_size_;
  std::vector<std::shared_ptr<const basis::KernelBasis>> bases_;
  std::vector<ad::Tensor> weights_;
  ad::Tensor bias_;
  std::vector<std::size_t> bias_channels_;
};

/// Ordinary convolution with per-channel bias and same padding.
class PlainConv final : public Layer {
 public:
  PlainConv(std::size_t in_channels, std::size_t out_channels, int kernel_size, std::mt19937_64& rng);

  ad::Tensor forward(const ad::Tensor& x) const override;
  std::vector<NamedParameter> parameters() const override;
  std::string kind() const override { return "conv"; }
  std::size_t in_channels() const override { return cin_; }
  std::size_t out_channels() const override { return cout_; }

  const ad::Tensor& weight() const { return weight_; }
  const ad::Tensor& bias() const { return bias_; }

 private:
  std::size_t cin_;
  std::size_t cout_;
  int kernel_size_;
  ad::Tensor weight_;
  ad::Tensor bias_;
};

/// Batch norm with statistics pooled over each field's channels, the batch
/// and all pixels. One scale per field; a shift only on trivial fields.
/// Batch statistics are used in every call.
class FieldBatchNorm final : public Layer {
 public:
  explicit FieldBatchNorm(FieldType field, double eps = 1e-5);

  ad::Tensor forward(const ad::Tensor& x) const override;
  std::vector<NamedParameter> parameters() const override;
  std::string kind() const override { return "field_batch_norm"; }
  std::size_t in_channels() const override { return field_.channels(); }
  std::size_t out_channels() const override { return field_.channels(); }

  const FieldType& field() const { return field_; }
  const ad::Tensor& scale() const { return scale_; }
  const ad::Tensor& shift() const { return shift_; }

 private:
  FieldType field_;
  double eps_;
  ad::Tensor scale_;
  ad::Tensor shift_;
  std::vector<std::size_t> shift_fields_;
};

/// Pointwise ReLU; refuses fields whose representation is not a permutation.
class ReLU final : public Layer {
 public:
  explicit ReLU(std::size_t channels) : channels_(channels) {}
  explicit ReLU(const FieldType& field);

  ad::Tensor forward(const ad::Tensor& x) const override;
  std::string kind() const override { return "relu"; }
  std::size_t in_channels() const override { return channels_; }
  std::size_t out_channels() const override { return channels_; }

 private:
  std::size_t channels_;
};

/// Field-pooled batch normalisation as a standalone differentiable op.
/// `scale` has one entry per field, `shift` one entry per field listed in
/// `shift_fields`.
ad::Tensor field_batch_norm(const ad::Tensor& x, const FieldType& field, const ad::Tensor& scale,
                            const ad::Tensor& shift, const std::vector<std::size_t>& shift_fields, double eps = 1e-5);

}  // namespace steer::nn
