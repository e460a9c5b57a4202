#include "steer/recon/mlem.hpp"

#include <cmath>

#include "steer/error.hpp"

namespace steer::recon {

namespace {

void require_sinogram(const ad::Tensor& g, const imaging::RadonOperator& op) {
  if (g.size() != op.angles() * op.detectors()) {
    throw Error(ErrorKind::ShapeMismatch, "sinogram " + ad::shape_to_string(g.shape()) + " does not match a " +
                                              std::to_string(op.angles()) + "x" + std::to_string(op.detectors()) +
                                              " operator");
  }
}

}  // namespace

ad::Tensor mlem_initial(const imaging::RadonOperator& op) {
  const auto& s = op.sensitivity();
  std::vector<double> f(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) f[i] = s[i] > 0.0 ? 1.0 : 0.0;
  return ad::Tensor::from({op.grid().height, op.grid().width}, std::move(f));
}

std::vector<ad::Tensor> mlem(const ad::Tensor& sinogram, const imaging::RadonOperator& op, std::size_t iterations) {
  require_sinogram(sinogram, op);
  for (double v : sinogram.values()) {
    if (v < 0.0 || !std::isfinite(v)) throw Error(ErrorKind::InvalidArgument, "MLEM needs a non-negative sinogram");
  }
  const auto& sens = op.sensitivity();
  std::vector<ad::Tensor> iterates{mlem_initial(op)};
  std::vector<double> f(iterates.front().values().begin(), iterates.front().values().end());
  std::vector<double> ratio(sinogram.size()), back(f.size());
  auto g = sinogram.values();
  for (std::size_t it = 0; it < iterations; ++it) {
    const auto af = op.forward(f);
    for (std::size_t k = 0; k < ratio.size(); ++k) ratio[k] = g[k] / (af[k] + kMlemEpsilon);
    op.adjoint(ratio, back);
    for (std::size_t i = 0; i < f.size(); ++i) f[i] = sens[i] > 0.0 ? f[i] / sens[i] * back[i] : 0.0;
    iterates.push_back(ad::Tensor::from({op.grid().height, op.grid().width}, f));
  }
  return iterates;
}

double poisson_log_likelihood(const ad::Tensor& sinogram, const imaging::RadonOperator& op, const ad::Tensor& image) {
  require_sinogram(sinogram, op);
  const auto af = op.forward(image.values());
  auto g = sinogram.values();
  double ll = 0.0;
  for (std::size_t k = 0; k < af.size(); ++k) ll += g[k] * std::log(af[k] + kMlemEpsilon) - af[k];
  return ll;
}

}  // namespace steer::recon
