#include "steer/nn/layers.hpp"

#include <cmath>

#include "steer/ad/ops.hpp"
#include "steer/error.hpp"

namespace steer::nn {

namespace {

void require_channels(const ad::Tensor& x, std::size_t channels, const std::string& who) {
  if (x.rank() != 4 || x.dim(1) != channels) {
    throw Error(ErrorKind::ShapeMismatch, who + ": expected [N, " + std::to_string(channels) + ", H, W], got " +
                                              ad::shape_to_string(x.shape()));
  }
}

// Places [d_out, d_in, s, s] blocks into a [Cout, Cin, s, s] kernel.
ad::Tensor assemble_blocks(const std::vector<ad::Tensor>& blocks, const FieldType& in, const FieldType& out,
                           std::size_t s) {
  const std::size_t cin = in.channels(), cout = out.channels(), ss = s * s;
  std::vector<double> kernel(cout * cin * ss, 0.0);
  struct Placement {
    std::size_t out_off, in_off, d_out, d_in;
  };
  std::vector<Placement> where;
  for (std::size_t o = 0; o < out.size(); ++o) {
    for (std::size_t i = 0; i < in.size(); ++i) {
      const Placement p{out.offset(o), in.offset(i), out.width(o), in.width(i)};
      auto v = blocks[where.size()].values();
      for (std::size_t a = 0; a < p.d_out; ++a)
        for (std::size_t b = 0; b < p.d_in; ++b)
          for (std::size_t q = 0; q < ss; ++q)
            kernel[((p.out_off + a) * cin + p.in_off + b) * ss + q] = v[(a * p.d_in + b) * ss + q];
      where.push_back(p);
    }
  }
  return ad::Tensor::make_op(
      "assemble_kernel", {cout, cin, s, s}, std::move(kernel), blocks,
      [where, cin, ss](std::span<const double> g, std::span<std::vector<double>*> gi) {
        for (std::size_t k = 0; k < where.size(); ++k) {
          if (!gi[k]) continue;
          const auto& p = where[k];
          auto& dst = *gi[k];
          for (std::size_t a = 0; a < p.d_out; ++a)
            for (std::size_t b = 0; b < p.d_in; ++b)
              for (std::size_t q = 0; q < ss; ++q)
                dst[(a * p.d_in + b) * ss + q] += g[((p.out_off + a) * cin + p.in_off + b) * ss + q];
        }
      });
}

// Adds bias[k] to every pixel of channel channels[k].
ad::Tensor add_selected_bias(const ad::Tensor& x, const ad::Tensor& bias, std::vector<std::size_t> channels) {
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<double> out(x.values().begin(), x.values().end());
  auto bv = bias.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t k = 0; k < channels.size(); ++k) {
      double* dst = out.data() + (b * c + channels[k]) * plane;
      for (std::size_t q = 0; q < plane; ++q) dst[q] += bv[k];
    }
  return ad::Tensor::make_op("field_bias", x.shape(), std::move(out), {x, bias},
                             [channels, n, c, plane](std::span<const double> g, std::span<std::vector<double>*> gi) {
                               if (gi[0]) {
                                 for (std::size_t q = 0; q < g.size(); ++q) (*gi[0])[q] += g[q];
                               }
                               if (gi[1]) {
                                 for (std::size_t b = 0; b < n; ++b)
                                   for (std::size_t k = 0; k < channels.size(); ++k) {
                                     const double* src = g.data() + (b * c + channels[k]) * plane;
                                     double acc = 0.0;
                                     for (std::size_t q = 0; q < plane; ++q) acc += src[q];
                                     (*gi[1])[k] += acc;
                                   }
                               }
                             });
}

}  // namespace

SteerableConv::SteerableConv(FieldType in, FieldType out, int kernel_size, bool bias, std::mt19937_64& rng)
    : in_(std::move(in)), out_(std::move(out)), kernel_size_(kernel_size) {
  if (kernel_size_ < 1 || kernel_size_ % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "steerable kernels need an odd size");
  }
  if (in_.order() != out_.order()) throw Error(ErrorKind::InvalidArgument, "field types disagree on the group");
  for (std::size_t o = 0; o < out_.size(); ++o)
    for (std::size_t i = 0; i < in_.size(); ++i)
      bases_.push_back(basis::cached_basis(in_.reps()[i], out_.reps()[o], kernel_size_));

  for (std::size_t o = 0; o < out_.size(); ++o) {
    double fan_in = 0.0;
    for (std::size_t i = 0; i < in_.size(); ++i) {
      fan_in += static_cast<double>(bases_[o * in_.size() + i]->effective_size() * in_.width(i));
    }
    const double bound = fan_in > 0.0 ? std::sqrt(3.0 / fan_in) : 0.0;
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (std::size_t i = 0; i < in_.size(); ++i) {
      const auto& b = *bases_[o * in_.size() + i];
      std::vector<double> w(b.size(), 0.0);
      for (std::size_t r : b.effective()) w[r] = dist(rng);
      weights_.push_back(ad::Tensor::from({b.size()}, std::move(w), true));
    }
  }
  if (bias) {
    for (std::size_t o = 0; o < out_.size(); ++o)
      if (out_.reps()[o].is_trivial()) bias_channels_.push_back(out_.offset(o));
    if (!bias_channels_.empty()) bias_ = ad::Tensor::zeros({bias_channels_.size()}, true);
  }
}

ad::Tensor SteerableConv::kernel() const {
  std::vector<ad::Tensor> blocks;
  blocks.reserve(weights_.size());
  for (std::size_t k = 0; k < weights_.size(); ++k) blocks.push_back(basis::expand_kernel(weights_[k], *bases_[k]));
  return assemble_blocks(blocks, in_, out_, static_cast<std::size_t>(kernel_size_));
}

ad::Tensor SteerableConv::forward(const ad::Tensor& x) const {
  require_channels(x, in_.channels(), "steerable_conv");
  auto y = ad::conv2d(x, kernel(), static_cast<std::size_t>(kernel_size_ / 2));
  if (bias_.defined()) y = add_selected_bias(y, bias_, bias_channels_);
  return y;
}

std::vector<NamedParameter> SteerableConv::parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t o = 0; o < out_.size(); ++o)
    for (std::size_t i = 0; i < in_.size(); ++i)
      out.push_back({"weight[" + std::to_string(o) + "," + std::to_string(i) + "]", weights_[o * in_.size() + i]});
  if (bias_.defined()) out.push_back({"bias", bias_});
  return out;
}

PlainConv::PlainConv(std::size_t in_channels, std::size_t out_channels, int kernel_size, std::mt19937_64& rng)
    : cin_(in_channels), cout_(out_channels), kernel_size_(kernel_size) {
  if (kernel_size_ < 1 || kernel_size_ % 2 == 0) throw Error(ErrorKind::InvalidArgument, "kernel size must be odd");
  const auto k = static_cast<std::size_t>(kernel_size_);
  // Same weight variance 1/fan_in as the steerable layers.
  const double fan_in = static_cast<double>(cin_ * k * k);
  std::uniform_real_distribution<double> weight_dist(-std::sqrt(3.0 / fan_in), std::sqrt(3.0 / fan_in));
  std::uniform_real_distribution<double> bias_dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
  std::vector<double> w(cout_ * cin_ * k * k), b(cout_);
  for (auto& v : w) v = weight_dist(rng);
  for (auto& v : b) v = bias_dist(rng);
  weight_ = ad::Tensor::from({cout_, cin_, k, k}, std::move(w), true);
  bias_ = ad::Tensor::from({cout_}, std::move(b), true);
}

ad::Tensor PlainConv::forward(const ad::Tensor& x) const {
  require_channels(x, cin_, "conv");
  return ad::add_channel_bias(ad::conv2d(x, weight_, static_cast<std::size_t>(kernel_size_ / 2)), bias_);
}

std::vector<NamedParameter> PlainConv::parameters() const { return {{"weight", weight_}, {"bias", bias_}}; }

FieldBatchNorm::FieldBatchNorm(FieldType field, double eps) : field_(std::move(field)), eps_(eps) {
  scale_ = ad::Tensor::full({field_.size()}, 1.0, true);
  for (std::size_t k = 0; k < field_.size(); ++k)
    if (field_.reps()[k].is_trivial()) shift_fields_.push_back(k);
  if (!shift_fields_.empty()) shift_ = ad::Tensor::zeros({shift_fields_.size()}, true);
}

ad::Tensor FieldBatchNorm::forward(const ad::Tensor& x) const {
  return field_batch_norm(x, field_, scale_, shift_, shift_fields_, eps_);
}

std::vector<NamedParameter> FieldBatchNorm::parameters() const {
  std::vector<NamedParameter> out{{"scale", scale_}};
  if (shift_.defined()) out.push_back({"shift", shift_});
  return out;
}

ReLU::ReLU(const FieldType& field) : channels_(field.channels()) {
  if (!field.all_permutation()) {
    throw Error(ErrorKind::InvalidArgument, "pointwise ReLU is only equivariant on permutation fields, got " +
                                                field.describe());
  }
}

ad::Tensor ReLU::forward(const ad::Tensor& x) const {
  require_channels(x, channels_, "relu");
  return ad::relu(x);
}

ad::Tensor field_batch_norm(const ad::Tensor& x, const FieldType& field, const ad::Tensor& scale,
                            const ad::Tensor& shift, const std::vector<std::size_t>& shift_fields, double eps) {
  require_channels(x, field.channels(), "field_batch_norm");
  if (scale.size() != field.size() || (shift.defined() ? shift.size() : 0) != shift_fields.size()) {
    throw Error(ErrorKind::ShapeMismatch, "field_batch_norm: affine parameters do not match the field type");
  }
  const std::size_t n = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  const std::size_t fields = field.size();
  std::vector<double> shift_of(fields, 0.0);
  if (shift.defined())
    for (std::size_t k = 0; k < shift_fields.size(); ++k) shift_of[shift_fields[k]] = shift.values()[k];

  auto in = x.values();
  std::vector<double> xhat(x.size()), out(x.size()), inv_std(fields);
  for (std::size_t f = 0; f < fields; ++f) {
    const std::size_t off = field.offset(f), d = field.width(f);
    const double count = static_cast<double>(n * d * plane);
    double mean = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = off; ch < off + d; ++ch) {
        const double* src = in.data() + (b * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) mean += src[q];
      }
    mean /= count;
    double residual = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = off; ch < off + d; ++ch) {
        const double* src = in.data() + (b * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) residual += src[q] - mean;
      }
    mean += residual / count;
    double var = 0.0;
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = off; ch < off + d; ++ch) {
        const double* src = in.data() + (b * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) var += (src[q] - mean) * (src[q] - mean);
      }
    var /= count;
    inv_std[f] = 1.0 / std::sqrt(var + eps);
    const double gamma = scale.values()[f];
    for (std::size_t b = 0; b < n; ++b)
      for (std::size_t ch = off; ch < off + d; ++ch) {
        const std::size_t base = (b * c + ch) * plane;
        for (std::size_t q = 0; q < plane; ++q) {
          xhat[base + q] = (in[base + q] - mean) * inv_std[f];
          out[base + q] = gamma * xhat[base + q] + shift_of[f];
        }
      }
  }

  std::vector<ad::Tensor> inputs{x, scale};
  if (shift.defined()) inputs.push_back(shift);
  std::vector<double> gammas(scale.values().begin(), scale.values().end());
  return ad::Tensor::make_op(
      "field_batch_norm", x.shape(), std::move(out), std::move(inputs),
      [field, shift_fields, xhat = std::move(xhat), inv_std = std::move(inv_std), gammas = std::move(gammas), n, c,
       plane](std::span<const double> g, std::span<std::vector<double>*> gi) {
        std::vector<double> dshift(field.size(), 0.0);
        for (std::size_t f = 0; f < field.size(); ++f) {
          const std::size_t off = field.offset(f), d = field.width(f);
          const double count = static_cast<double>(n * d * plane);
          double sum_g = 0.0, sum_gx = 0.0;
          for (std::size_t b = 0; b < n; ++b)
            for (std::size_t ch = off; ch < off + d; ++ch) {
              const std::size_t base = (b * c + ch) * plane;
              for (std::size_t q = 0; q < plane; ++q) {
                sum_g += g[base + q];
                sum_gx += g[base + q] * xhat[base + q];
              }
            }
          dshift[f] = sum_g;
          if (gi[1]) (*gi[1])[f] += sum_gx;
          if (gi[0]) {
            const double k = gammas[f] * inv_std[f];
            const double mg = sum_g / count, mgx = sum_gx / count;
            for (std::size_t b = 0; b < n; ++b)
              for (std::size_t ch = off; ch < off + d; ++ch) {
                const std::size_t base = (b * c + ch) * plane;
                for (std::size_t q = 0; q < plane; ++q)
                  (*gi[0])[base + q] += k * (g[base + q] - mg - xhat[base + q] * mgx);
              }
          }
        }
        if (gi.size() > 2 && gi[2]) {
          for (std::size_t k = 0; k < shift_fields.size(); ++k) (*gi[2])[k] += dshift[shift_fields[k]];
        }
      });
}

}  // namespace steer::nn
