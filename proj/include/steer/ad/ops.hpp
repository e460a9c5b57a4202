#pragma once

#include "steer/ad/tensor.hpp"

namespace steer::ad {

/// Zero-padded stride-1 cross-correlation.
/// input [N, Cin, H, W], kernel [Cout, Cin, k, k] with k odd.
/// Output is [N, Cout, H + 2p - k + 1, W + 2p - k + 1].
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t padding);

/// Adds bias[c] to every pixel of channel c of an [N, C, H, W] tensor.
Tensor add_channel_bias(const Tensor& input, const Tensor& bias);

Tensor relu(const Tensor& x);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double factor);
Tensor sum(const Tensor& x);
Tensor reshape(const Tensor& x, Shape shape);

/// Mean of squared differences; scalar output.
Tensor mse_loss(const Tensor& a, const Tensor& b);

}  // namespace steer::ad
