#include "steer/recon/pipelines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>

#include "steer/ad/ops.hpp"
#include "steer/error.hpp"
#include "steer/imaging/phantom.hpp"
#include "steer/imaging/rotate.hpp"
#include "steer/recon/mlem.hpp"

namespace steer::recon {

namespace {

void require_square(const ad::Tensor& image, const char* who) {
  if (image.rank() != 2 || image.dim(0) != image.dim(1)) {
    throw Error(ErrorKind::ShapeMismatch, std::string(who) + ": expected a square [H, W] image, got " +
                                              ad::shape_to_string(image.shape()));
  }
}

void require_geometry(const ad::Tensor& sinogram, const imaging::RadonOperator& op, const char* who) {
  const auto& grid = op.grid();
  if (op.angles() != grid.height || op.detectors() != grid.width) {
    throw Error(ErrorKind::Geometry, std::string(who) + ": network input and output grids must match (T = D = H)");
  }
  if (sinogram.rank() != 2 || sinogram.dim(0) != op.angles() || sinogram.dim(1) != op.detectors()) {
    throw Error(ErrorKind::Geometry, std::string(who) + ": sinogram " + ad::shape_to_string(sinogram.shape()) +
                                         " does not match the operator");
  }
}

double positive_max(const ad::Tensor& t) {
  double m = 0.0;
  for (double v : t.values()) m = std::max(m, v);
  return m > 0.0 ? m : 1.0;
}

ad::Tensor scaled(const ad::Tensor& t, double factor) {
  std::vector<double> v(t.values().begin(), t.values().end());
  for (auto& x : v) x *= factor;
  return ad::Tensor::from(t.shape(), std::move(v));
}

// Pixels the projector never reaches are unconstrained by the loss; they are
// reported as zero.
ad::Tensor seen_pixels(const ad::Tensor& image, const imaging::RadonOperator& op) {
  const auto& sens = op.sensitivity();
  std::vector<double> v(image.values().begin(), image.values().end());
  for (std::size_t i = 0; i < v.size(); ++i)
    if (sens[i] <= 0.0) v[i] = 0.0;
  return ad::Tensor::from(image.shape(), std::move(v));
}

TrainingRun forward_model_run(const ad::Tensor& input, const ad::Tensor& target, double scale,
                              const imaging::RadonOperator& op, nn::Network& net, const TrainingOptions& options,
                              const std::optional<ad::Tensor>& truth) {
  const auto x = as_batch(input);
  const auto y = as_batch(target);
  Objective objective{
      [&op, &y](const ad::Tensor& out) { return ad::mse_loss(imaging::radon_forward(op, out), y); },
      [&op, scale](const ad::Tensor& out) { return seen_pixels(as_image(out, scale), op); },
  };
  return train(net, x, objective, options, truth);
}

}  // namespace

TrainingRun dip_denoise(const ad::Tensor& noisy, nn::Network& net, const TrainingOptions& options,
                        const std::optional<ad::Tensor>& truth) {
  require_square(noisy, "dip_denoise");
  const auto x = as_batch(noisy);
  Objective objective{
      [&x](const ad::Tensor& out) { return ad::mse_loss(out, x); },
      [](const ad::Tensor& out) { return as_image(out); },
  };
  return train(net, x, objective, options, truth);
}

TrainingRun dip_reconstruct(const ad::Tensor& sinogram, const imaging::RadonOperator& op, nn::Network& net,
                            const TrainingOptions& options, const std::optional<ad::Tensor>& truth) {
  require_geometry(sinogram, op, "dip_reconstruct");
  const double scale = positive_max(sinogram);
  const auto g = scaled(sinogram, 1.0 / scale);
  return forward_model_run(g, g, scale, op, net, options, truth);
}

AssistedResult scnn_assisted_recon(const ad::Tensor& sinogram, const imaging::RadonOperator& op, nn::Network& net,
                                   std::size_t mlem_iterations, const TrainingOptions& options,
                                   const std::optional<ad::Tensor>& truth) {
  require_geometry(sinogram, op, "scnn_assisted_recon");
  const double scale = positive_max(sinogram);
  const auto g = scaled(sinogram, 1.0 / scale);
  auto iterates = mlem(g, op, mlem_iterations);
  AssistedResult result;
  result.mlem_image = scaled(iterates.back(), scale);
  result.refined = forward_model_run(iterates.back(), g, scale, op, net, options, truth);
  return result;
}

ad::Tensor predict(const nn::Network& net, const ad::Tensor& image) {
  return as_image(net.forward(as_batch(image)));
}

GeneralizationResult generalization_experiment(const std::vector<ImagePair>& train_set,
                                               const std::vector<ImagePair>& test_set, nn::Network& net,
                                               const TrainingOptions& options) {
  if (train_set.empty()) throw Error(ErrorKind::InvalidArgument, "generalization: empty training set");
  const auto& shape = train_set.front().clean.shape();
  for (const auto* set : {&train_set, &test_set})
    for (const auto& p : *set)
      if (p.noisy.shape() != shape || p.clean.shape() != shape) {
        throw Error(ErrorKind::ShapeMismatch, "generalization: all images must share one size");
      }

  std::vector<ad::Tensor> inputs, targets;
  for (const auto& p : train_set) {
    inputs.push_back(as_batch(p.noisy));
    targets.push_back(as_batch(p.clean));
  }
  const double inv = 1.0 / static_cast<double>(train_set.size());

  GeneralizationResult result;
  auto& run = result.training;
  run.label = net.label();
  run.epochs = options.epochs;
  run.seed = options.seed;
  auto params = net.parameters();
  auto state = ad::AdamState::for_parameters(params);
  for (std::size_t epoch = 1; epoch <= options.epochs; ++epoch) {
    for (auto& p : params) p.zero_grad();
    ad::Tensor loss;
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      auto term = ad::scale(ad::mse_loss(net.forward(inputs[k]), targets[k]), inv);
      loss = loss.defined() ? ad::add(loss, term) : term;
    }
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw Error(ErrorKind::NonFinite, run.label + ": loss became non-finite at epoch " + std::to_string(epoch));
    }
    run.loss.push_back(value);
    ad::backward(loss);
    ad::adam_step(params, state, options.adam);
  }

  for (const auto& p : train_set) result.train_metrics.push_back(metrics::compare(predict(net, p.noisy), p.clean));
  double total = 0.0;
  for (const auto& p : test_set) {
    auto out = predict(net, p.noisy);
    result.test_metrics.push_back(metrics::compare(out, p.clean));
    total += result.test_metrics.back().mse;
    result.test_outputs.push_back(std::move(out));
  }
  result.test_loss = test_set.empty() ? 0.0 : total / static_cast<double>(test_set.size());
  run.output = result.test_outputs.empty() ? predict(net, train_set.front().noisy) : result.test_outputs.front();
  return result;
}

std::vector<ad::Tensor> radial_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double c = (static_cast<double>(size) - 1.0) / 2.0, rmax = 0.85 * static_cast<double>(size) / 2.0;
  std::vector<ad::Tensor> out;
  for (std::size_t n = 0; n < count; ++n) {
    struct Band {
      double inner, outer, level;
    };
    std::vector<Band> bands;
    const double body = rmax * (0.7 + 0.3 * unit(rng));
    bands.push_back({0.0, body, 0.3 + 0.3 * unit(rng)});
    const int extra = 2 + static_cast<int>(unit(rng) * 3.0);
    for (int b = 0; b < extra; ++b) {
      const double inner = body * unit(rng) * 0.8;
      const double width = 1.5 + unit(rng) * body * 0.3;
      bands.push_back({inner, std::min(body, inner + width), (unit(rng) - 0.4) * 0.6});
    }
    std::vector<double> v(size * size);
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) {
        const double r = std::hypot(static_cast<double>(i) - c, static_cast<double>(j) - c);
        double acc = 0.0;
        for (const auto& b : bands)
          if (r >= b.inner && r <= b.outer) acc += b.level;
        v[i * size + j] = std::clamp(acc, 0.0, 1.0);
      }
    out.push_back(ad::Tensor::from({size, size}, std::move(v)));
  }
  return out;
}

std::vector<ad::Tensor> ellipse_dataset(std::size_t count, std::size_t size, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double c = (static_cast<double>(size) - 1.0) / 2.0, half = static_cast<double>(size) / 2.0;
  std::vector<ad::Tensor> out;
  for (std::size_t n = 0; n < count; ++n) {
    struct Ellipse {
      double x0, y0, a, b, angle, level;
    };
    std::vector<Ellipse> shapes;
    shapes.push_back({(unit(rng) - 0.5) * 0.1, (unit(rng) - 0.5) * 0.1, 0.55 + 0.2 * unit(rng),
                      0.7 + 0.15 * unit(rng), unit(rng) * std::numbers::pi, 0.4 + 0.2 * unit(rng)});
    const int extra = 3 + static_cast<int>(unit(rng) * 4.0);
    for (int k = 0; k < extra; ++k) {
      const double r = 0.45 * std::sqrt(unit(rng)), phi = 2.0 * std::numbers::pi * unit(rng);
      shapes.push_back({r * std::cos(phi), r * std::sin(phi), 0.05 + 0.2 * unit(rng), 0.05 + 0.12 * unit(rng),
                        unit(rng) * std::numbers::pi, (unit(rng) - 0.35) * 0.7});
    }
    std::vector<double> v(size * size);
    for (std::size_t i = 0; i < size; ++i)
      for (std::size_t j = 0; j < size; ++j) {
        const double x = (static_cast<double>(j) - c) / half, y = (c - static_cast<double>(i)) / half;
        double acc = 0.0;
        for (const auto& e : shapes) {
          const double dx = x - e.x0, dy = y - e.y0;
          const double u = dx * std::cos(e.angle) + dy * std::sin(e.angle);
          const double q = -dx * std::sin(e.angle) + dy * std::cos(e.angle);
          if (u * u / (e.a * e.a) + q * q / (e.b * e.b) <= 1.0) acc += e.level;
        }
        v[i * size + j] = std::clamp(acc, 0.0, 1.0);
      }
    out.push_back(ad::Tensor::from({size, size}, std::move(v)));
  }
  return out;
}

std::vector<ImagePair> make_pairs(const std::vector<ad::Tensor>& clean, double counts_per_unit, std::uint64_t seed) {
  std::vector<ImagePair> out;
  for (std::size_t k = 0; k < clean.size(); ++k) {
    out.push_back({imaging::add_poisson_noise(clean[k], counts_per_unit, seed + k), clean[k]});
  }
  return out;
}

ad::Tensor rotate_quarter(const ad::Tensor& image, int quarter_turns) {
  require_square(image, "rotate_quarter");
  std::vector<double> v(image.size());
  imaging::rotate_plane_quarter(image.values(), image.dim(0), quarter_turns, v);
  return ad::Tensor::from(image.shape(), std::move(v));
}

std::vector<ImagePair> rotate_pairs(const std::vector<ImagePair>& pairs, int quarter_turns) {
  std::vector<ImagePair> out;
  for (const auto& p : pairs) out.push_back({rotate_quarter(p.noisy, quarter_turns), rotate_quarter(p.clean, quarter_turns)});
  return out;
}

double quarter_turn_consistency(const nn::Network& net, const ad::Tensor& image, int quarter_turns) {
  const auto lhs = predict(net, rotate_quarter(image, quarter_turns));
  const auto rhs = rotate_quarter(predict(net, image), quarter_turns);
  const std::size_t n = image.dim(0);
  const double c = (static_cast<double>(n) - 1.0) / 2.0, radius = 0.9 * static_cast<double>(n) / 2.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      const double dy = static_cast<double>(i) - c, dx = static_cast<double>(j) - c;
      if (dx * dx + dy * dy > radius * radius) continue;
      const double a = lhs.at(i * n + j), b = rhs.at(i * n + j);
      num += (a - b) * (a - b);
      den += b * b;
    }
  if (den == 0.0) return num == 0.0 ? 0.0 : std::numeric_limits<double>::infinity();
  return std::sqrt(num / den);
}

}  // namespace steer::recon
