#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "steer/ad/adam.hpp"
#include "steer/ad/tensor.hpp"
#include "steer/nn/network.hpp"

namespace steer::recon {

struct TrainingOptions {
  std::size_t epochs = 2000;
  std::uint64_t seed = 0;
  std::size_t checkpoint_every = 100;
  ad::AdamConfig adam;
};

struct Checkpoint {
  std::size_t epoch = 0;
  double loss = 0.0;
  std::optional<double> mse;
  std::optional<double> ssim;
  ad::Tensor image;
};

/// One training trajectory. Epoch e (1-based) reports the loss and output of
/// the forward pass made with the weights after e - 1 optimiser steps.
struct TrainingRun {
  std::string label;
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  std::vector<double> loss;
  /// Per-epoch metrics against the truth; empty when no truth was given.
  std::vector<double> mse_vs_truth;
  std::vector<double> ssim_vs_truth;
  /// Epoch 1, every `checkpoint_every` epochs, and the final epoch.
  std::vector<Checkpoint> checkpoints;
  ad::Tensor output;

  const Checkpoint* checkpoint(std::size_t epoch) const;
};

/// Checkpoint epochs for a run: 1, k * every, and `epochs`.
std::vector<std::size_t> checkpoint_epochs(std::size_t epochs, std::size_t every);

struct Objective {
  /// Builds the scalar loss from the network output.
  std::function<ad::Tensor(const ad::Tensor& output)> loss;
  /// Maps the network output to the reported [H, W] image.
  std::function<ad::Tensor(const ad::Tensor& output)> image;
};

/// Full-batch Adam on `net` for `options.epochs` steps with input `x`.
/// `truth` only feeds the reported metrics; it never reaches a gradient.
TrainingRun train(nn::Network& net, const ad::Tensor& x, const Objective& objective, const TrainingOptions& options,
                  const std::optional<ad::Tensor>& truth);

/// [H, W] or [1, 1, H, W] -> [1, 1, H, W] leaf copy.
ad::Tensor as_batch(const ad::Tensor& image);
/// [1, 1, H, W] -> [H, W] leaf copy, optionally scaled.
ad::Tensor as_image(const ad::Tensor& batch, double scale = 1.0);

}  // namespace steer::recon
