#pragma once

#include <optional>
#include <vector>

#include "steer/imaging/radon.hpp"
#include "steer/metrics/metrics.hpp"
#include "steer/recon/training.hpp"

namespace steer::recon {

/// Self-supervised denoising: input and target are both the noisy image.
TrainingRun dip_denoise(const ad::Tensor& noisy, nn::Network& net, const TrainingOptions& options,
                        const std::optional<ad::Tensor>& truth = std::nullopt);

/// Forward-model reconstruction. The sinogram (scaled to unit max) is the
/// network input; the loss is MSE(A net(g), g). Reported images are rescaled
/// by the same factor, and pixels outside the projector support read zero.
TrainingRun dip_reconstruct(const ad::Tensor& sinogram, const imaging::RadonOperator& op, nn::Network& net,
                            const TrainingOptions& options, const std::optional<ad::Tensor>& truth = std::nullopt);

struct AssistedResult {
  /// Final MLEM iterate in image units. The network sees it divided by the
  /// sinogram scale.
  ad::Tensor mlem_image;
  TrainingRun refined;
};

/// MLEM for `mlem_iterations`, then forward-model training with the MLEM
/// image as network input.
AssistedResult scnn_assisted_recon(const ad::Tensor& sinogram, const imaging::RadonOperator& op, nn::Network& net,
                                   std::size_t mlem_iterations, const TrainingOptions& options,
                                   const std::optional<ad::Tensor>& truth = std::nullopt);

struct ImagePair {
  ad::Tensor noisy;
  ad::Tensor clean;
};

struct GeneralizationResult {
  TrainingRun training;
  std::vector<metrics::MetricReport> train_metrics;
  std::vector<metrics::MetricReport> test_metrics;
  std::vector<ad::Tensor> test_outputs;
  /// Mean clean-target loss on the test set after training.
  double test_loss = 0.0;
};

/// Supervised denoiser trained on `train` (mean per-image MSE, one forward
/// pass per image), then evaluated image by image on `test`.
GeneralizationResult generalization_experiment(const std::vector<ImagePair>& train,
                                               const std::vector<ImagePair>& test, nn::Network& net,
                                               const TrainingOptions& options);

/// Network output for one [H, W] image as an [H, W] image.
ad::Tensor predict(const nn::Network& net, const ad::Tensor& image);

/// || f(R x) - R f(x) || / || R f(x) || for the quarter-turn rotation R,
/// over pixels within 0.9 * H/2 of the center. Works for any network.
double quarter_turn_consistency(const nn::Network& net, const ad::Tensor& image, int quarter_turns);

/// Square image rotated by quarter_turns * 90 degrees (exact permutation).
ad::Tensor rotate_quarter(const ad::Tensor& image, int quarter_turns);

/// Radially symmetric images: sums of concentric discs and rings with random
/// radii and levels, clamped to [0, 1].
std::vector<ad::Tensor> radial_dataset(std::size_t count, std::size_t size, std::uint64_t seed);
/// Images without rotational symmetry: random off-center ellipses at random
/// orientations inside the inscribed disk, clamped to [0, 1].
std::vector<ad::Tensor> ellipse_dataset(std::size_t count, std::size_t size, std::uint64_t seed);

/// Clean images paired with Poisson-noisy copies (seed + index per image).
std::vector<ImagePair> make_pairs(const std::vector<ad::Tensor>& clean, double counts_per_unit, std::uint64_t seed);

/// The pairs rotated by quarter_turns * 90 degrees, noise included.
std::vector<ImagePair> rotate_pairs(const std::vector<ImagePair>& pairs, int quarter_turns);

}  // namespace steer::recon
