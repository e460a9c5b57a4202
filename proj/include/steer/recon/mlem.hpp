#pragma once

#include <vector>

#include "steer/ad/tensor.hpp"
#include "steer/imaging/radon.hpp"

namespace steer::recon {

inline constexpr double kMlemEpsilon = 1e-12;

/// Uniform start: ones wherever the sensitivity A^T 1 is positive.
ad::Tensor mlem_initial(const imaging::RadonOperator& op);

/// Binned-sinogram EM. Element k of the result is the k-th iterate, starting
/// with the uniform image at k = 0.
///   f <- f / (A^T 1) * A^T (g / (A f + eps))
/// Pixels with zero sensitivity stay zero.
std::vector<ad::Tensor> mlem(const ad::Tensor& sinogram, const imaging::RadonOperator& op, std::size_t iterations);

/// sum g log(A f + eps) - A f, dropping the constant log(g!) term.
double poisson_log_likelihood(const ad::Tensor& sinogram, const imaging::RadonOperator& op, const ad::Tensor& image);

}  // namespace steer::recon
