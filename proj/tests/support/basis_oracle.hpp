#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "steer/basis/steerable_basis.hpp"

namespace steer::test {

/// Dimension of the steerable kernel space by brute force: on every orbit of
/// the grid, the group average of the kernel action is a projector onto the
/// steerable kernels, and its rank is read off the singular values.
inline std::size_t orbit_rank_dimension(const groups::Representation& rep_in, const groups::Representation& rep_out,
                                        const basis::KernelGrid& grid) {
  const int n = grid.order, din = rep_in.dim(), dout = rep_out.dim(), block = din * dout;
  std::vector<Eigen::MatrixXd> act(n);
  for (int k = 0; k < n; ++k) {
    const auto& a = rep_out.matrix(k);
    const auto& b = rep_in.matrix(k);
    act[k].resize(block, block);
    for (int i = 0; i < dout; ++i)
      for (int j = 0; j < dout; ++j) act[k].block(i * din, j * din, din, din) = a(i, j) * b;
  }
  std::vector<bool> seen(grid.size(), false);
  std::size_t total = 0;
  for (std::size_t s = 0; s < grid.size(); ++s) {
    if (seen[s]) continue;
    std::vector<int> orbit;
    for (int k = 0; k < n; ++k) {
      const int t = grid.action[k][s];
      if (!seen[t]) {
        seen[t] = true;
        orbit.push_back(t);
      }
    }
    const auto pos = [&](int sample) {
      for (std::size_t i = 0; i < orbit.size(); ++i)
        if (orbit[i] == sample) return static_cast<Eigen::Index>(i);
      return Eigen::Index{-1};
    };
    const Eigen::Index m = static_cast<Eigen::Index>(orbit.size()) * block;
    Eigen::MatrixXd projector = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < n; ++k)
      for (std::size_t i = 0; i < orbit.size(); ++i) {
        const Eigen::Index to = pos(grid.action[k][orbit[i]]);
        projector.block(to * block, static_cast<Eigen::Index>(i) * block, block, block) += act[k] / n;
      }
    // Projector eigenvalues are 0 or 1, so an absolute cut at 1/2 is unambiguous.
    const Eigen::VectorXd sv = Eigen::JacobiSVD<Eigen::MatrixXd>(projector).singularValues();
    total += static_cast<std::size_t>((sv.array() > 0.5).count());
  }
  return total;
}

/// Character formula for the same dimension: (1/N) sum_g fix(g) chi_out(g) chi_in(g).
inline double character_dimension(const groups::Representation& rep_in, const groups::Representation& rep_out,
                                  const basis::KernelGrid& grid) {
  double sum = 0.0;
  for (int k = 0; k < grid.order; ++k) {
    std::size_t fixed = 0;
    for (std::size_t s = 0; s < grid.size(); ++s) fixed += grid.action[k][s] == static_cast<int>(s);
    sum += static_cast<double>(fixed) * rep_out.matrix(k).trace() * rep_in.matrix(k).trace();
  }
  return sum / grid.order;
}

}  // namespace steer::test
