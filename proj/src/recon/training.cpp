#include "steer/recon/training.hpp"

#include <cmath>
#include <sstream>

#include "steer/error.hpp"
#include "steer/metrics/metrics.hpp"

namespace steer::recon {

const Checkpoint* TrainingRun::checkpoint(std::size_t epoch) const {
  for (const auto& c : checkpoints)
    if (c.epoch == epoch) return &c;
  return nullptr;
}

std::vector<std::size_t> checkpoint_epochs(std::size_t epochs, std::size_t every) {
  std::vector<std::size_t> out;
  if (epochs == 0) return out;
  out.push_back(1);
  if (every > 0)
    for (std::size_t e = every; e < epochs; e += every)
      if (e != 1) out.push_back(e);
  if (epochs != 1) out.push_back(epochs);
  return out;
}

ad::Tensor as_batch(const ad::Tensor& image) {
  if (image.rank() == 2) return ad::Tensor::from({1, 1, image.dim(0), image.dim(1)}, {image.values().begin(), image.values().end()});
  if (image.rank() == 4 && image.dim(0) == 1 && image.dim(1) == 1) return image.detach();
  throw Error(ErrorKind::ShapeMismatch, "expected an [H, W] image, got " + ad::shape_to_string(image.shape()));
}

ad::Tensor as_image(const ad::Tensor& batch, double scale) {
  const std::size_t h = batch.dim(batch.rank() - 2), w = batch.dim(batch.rank() - 1);
  if (batch.size() != h * w) throw Error(ErrorKind::ShapeMismatch, "expected a single-plane output");
  std::vector<double> v(batch.values().begin(), batch.values().end());
  if (scale != 1.0)
    for (auto& x : v) x *= scale;
  return ad::Tensor::from({h, w}, std::move(v));
}

TrainingRun train(nn::Network& net, const ad::Tensor& x, const Objective& objective, const TrainingOptions& options,
                  const std::optional<ad::Tensor>& truth) {
  TrainingRun run;
  run.label = net.label();
  run.epochs = options.epochs;
  run.seed = options.seed;
  run.loss.reserve(options.epochs);

  auto params = net.parameters();
  auto state = ad::AdamState::for_parameters(params);
  const auto marks = checkpoint_epochs(options.epochs, options.checkpoint_every);
  std::size_t next_mark = 0;
  const double range = truth ? metrics::dynamic_range(*truth) : 0.0;

  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (auto& p : params) p.zero_grad();
    const auto out = net.forward(x);
    const auto loss = objective.loss(out);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      std::ostringstream msg;
      msg << run.label << ": loss became non-finite at epoch " << epoch;
      throw Error(ErrorKind::NonFinite, msg.str());
    }
    run.loss.push_back(value);

    const bool mark = next_mark < marks.size() && marks[next_mark] == epoch;
    std::optional<ad::Tensor> image;
    if (truth || mark) image = objective.image(out);
    Checkpoint cp{epoch, value, std::nullopt, std::nullopt, {}};
    if (truth) {
      const double m = metrics::mse(*image, *truth);
      const double s = metrics::ssim(*image, *truth, range > 0.0 ? range : 1.0);
      run.mse_vs_truth.push_back(m);
      run.ssim_vs_truth.push_back(s);
      cp.mse = m;
      cp.ssim = s;
    }
    if (mark) {
      cp.image = *image;
      run.checkpoints.push_back(cp);
      ++next_mark;
    }
    if (epoch == options.epochs) run.output = *image;

    ad::backward(loss);
    ad::adam_step(params, state, options.adam);
  }
  if (options.epochs == 0) run.output = objective.image(net.forward(x));
  return run;
}

}  // namespace steer::recon
