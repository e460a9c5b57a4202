#include <gtest/gtest.h>

#include <random>

#include "steer/ad/ops.hpp"
#include "steer/basis/steerable_basis.hpp"
#include "steer/error.hpp"
#include "steer/nn/field.hpp"
#include "support/basis_oracle.hpp"
#include "support/test_support.hpp"

using namespace steer::basis;
using steer::groups::GroupElement;
using steer::groups::Representation;
namespace ad = steer::ad;

namespace {

std::vector<Representation> rep_family(int n) {
  return {Representation::trivial(n), Representation::irrep(n, std::min(1, n / 2)), Representation::regular(n)};
}

// Complex angular frequencies carried by a real irrep of C_N.
std::vector<int> frequencies(int n, int m) {
  if (m == 0 || 2 * m == n) return {m};
  return {m, -m};
}

ad::Tensor random_weights(std::size_t count, std::uint64_t seed) {
  return steer::test::random_tensor({count}, seed);
}

}  // namespace

TEST(PolarGrid, SampleCounts) {
  EXPECT_EQ(polar_grid(1, 5).size(), 1u);
  EXPECT_EQ(polar_grid(3, 8).size(), 1u + 64u);
  EXPECT_EQ(polar_grid(5, 4).size(), 1u + 2u * 32u);
  EXPECT_THROW(polar_grid(4, 4), steer::Error);
  EXPECT_THROW(polar_grid(3, 4, 6), steer::Error);
}

TEST(PolarGrid, RotationsPermuteSamplesExactly) {
  const auto grid = polar_grid(5, 8);
  for (int k = 0; k < 8; ++k) {
    const double angle = GroupElement(8, k).angle();
    EXPECT_EQ(grid.action[k][0], 0);
    for (std::size_t s = 0; s < grid.size(); ++s) {
      const auto& p = grid.samples[s];
      const auto& q = grid.samples[grid.action[k][s]];
      EXPECT_NEAR(q.x, std::cos(angle) * p.x - std::sin(angle) * p.y, 1e-12);
      EXPECT_NEAR(q.y, std::sin(angle) * p.x + std::cos(angle) * p.y, 1e-12);
    }
  }
}

TEST(Solver, OrbitCountExamples) {
  const auto triv4 = Representation::trivial(4);
  EXPECT_EQ(solve_basis_nullspace(triv4, triv4, polar_grid(3, 4, 8)).size(), 3u);
  const auto triv8 = Representation::trivial(8);
  EXPECT_EQ(solve_basis_nullspace(triv8, triv8, polar_grid(3, 8, 8)).size(), 2u);
}

TEST(Solver, TrivialGroupGivesFullSpace) {
  const auto grid = polar_grid(3, 1);
  const auto reg = Representation::regular(1);
  const auto triv = Representation::trivial(1);
  EXPECT_EQ(solve_basis_nullspace(triv, triv, grid).size(), grid.size());
  const auto two = steer::groups::direct_sum_rep({triv, reg});
  EXPECT_EQ(solve_basis_nullspace(two, reg, grid).size(), grid.size() * 2);
}

TEST(Solver, DimensionMatchesOrbitRankOracle) {
  for (int n : {1, 2, 4, 8}) {
    for (int s : {1, 3, 5}) {
      const auto grid = polar_grid(s, n);
      for (const auto& rin : rep_family(n))
        for (const auto& rout : rep_family(n)) {
          const auto b = solve_basis_nullspace(rin, rout, grid);
          const auto oracle = steer::test::orbit_rank_dimension(rin, rout, grid);
          EXPECT_EQ(b.size(), oracle) << "N=" << n << " s=" << s << " " << rin.name() << "->" << rout.name();
          EXPECT_NEAR(steer::test::character_dimension(rin, rout, grid), static_cast<double>(oracle), 1e-9);
        }
    }
  }
}

TEST(Solver, IrrepCountsFollowFrequencySelection) {
  const int n = 8, s = 5;
  const auto grid = polar_grid(s, n);
  const int a = grid.angular_samples;
  for (int min = 0; min <= n / 2; ++min)
    for (int mout = 0; mout <= n / 2; ++mout) {
      std::size_t center = 0, pairs = 0;
      for (int fi : frequencies(n, min))
        for (int fo : frequencies(n, mout)) {
          ++pairs;
          center += ((fo - fi) % n + n) % n == 0;
        }
      // Each congruence class mod N holds A / N ring frequencies.
      const std::size_t expected = center + grid.rings() * pairs * static_cast<std::size_t>(a / n);
      const auto b = solve_basis_nullspace(Representation::irrep(n, min), Representation::irrep(n, mout), grid);
      EXPECT_EQ(b.size(), expected) << min << "->" << mout;
    }
}

TEST(Solver, BasisIsSteerableAndOrthonormal) {
  for (int n : {2, 4, 8})
    for (const auto& rin : rep_family(n))
      for (const auto& rout : rep_family(n)) {
        const auto b = solve_basis_nullspace(rin, rout, polar_grid(3, n));
        EXPECT_LE(verify_steerability(b), 1e-10);
        EXPECT_LE(orthonormality_defect(b), 1e-10);
      }
}

TEST(Solver, OverflowGuard) {
  const auto reg = Representation::regular(8);
  try {
    solve_basis_nullspace(reg, reg, polar_grid(5, 8), {.max_unknowns = 1000});
    FAIL();
  } catch (const steer::Error& e) {
    EXPECT_EQ(e.kind(), steer::ErrorKind::DimensionOverflow);
  }
}

TEST(Steerability, IdentityOnlyGroupHasZeroResidual) {
  const auto grid = polar_grid(3, 1);
  std::vector<double> kernel(grid.size());
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : kernel) v = u(rng);
  const auto t = Representation::trivial(1);
  EXPECT_EQ(steerability_residual(t, t, grid, kernel), 0.0);
}

TEST(Steerability, RandomKernelIsRejected) {
  const auto grid = polar_grid(3, 8);
  const auto reg = Representation::regular(8);
  const auto triv = Representation::trivial(8);
  std::vector<double> kernel(grid.size() * 8);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : kernel) v = u(rng);
  EXPECT_GT(steerability_residual(triv, reg, grid, kernel), 1e-2);
}

TEST(Cartesian, CFourTrivialBasisSpansOrbitIndicators) {
  const auto t = Representation::trivial(4);
  const auto b = solve_basis_nullspace(t, t, cartesian_grid(3, 4));
  ASSERT_EQ(b.size(), 3u);
  Eigen::MatrixXd indicators = Eigen::MatrixXd::Zero(9, 3);
  for (int p = 0; p < 9; ++p) {
    const int dy = p / 3 - 1, dx = p % 3 - 1;
    indicators(p, dx == 0 && dy == 0 ? 0 : (dx == 0 || dy == 0 ? 1 : 2)) = 1.0;
  }
  const Eigen::MatrixXd& c = b.cartesian();
  ASSERT_EQ(c.rows(), 9);
  // Each indicator lies in the span of the sampled basis and vice versa.
  const Eigen::MatrixXd coeffs = c.colPivHouseholderQr().solve(indicators);
  EXPECT_LE((c * coeffs - indicators).cwiseAbs().maxCoeff(), 1e-12);
  const Eigen::MatrixXd back = indicators.colPivHouseholderQr().solve(c);
  EXPECT_LE((indicators * back - c).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Cartesian, SizeOneKernels) {
  for (int n : {2, 4, 8}) {
    const auto b = solve_basis_nullspace(Representation::trivial(n), Representation::regular(n), polar_grid(1, n));
    EXPECT_EQ(b.size(), 1u);
    EXPECT_EQ(b.cartesian().rows(), n);
    EXPECT_NEAR(b.cartesian().col(0).norm(), 1.0, 1e-12);
  }
}

TEST(Cartesian, UnitNormOrZero) {
  const auto reg = Representation::regular(8);
  const auto b = solve_basis_nullspace(reg, reg, polar_grid(3, 8));
  EXPECT_GT(b.effective_size(), 0u);
  for (std::size_t r = 0; r < b.size(); ++r) {
    const double norm = b.cartesian().col(static_cast<Eigen::Index>(r)).norm();
    if (b.degenerate()[r]) {
      EXPECT_EQ(norm, 0.0);
    } else {
      EXPECT_NEAR(norm, 1.0, 1e-12);
    }
  }
}

TEST(Cartesian, ZeroPolarElementSamplesToZero) {
  const auto t = Representation::trivial(4);
  const auto grid = polar_grid(3, 4);
  const auto solved = solve_basis_nullspace(t, t, grid);
  Eigen::MatrixXd polar = solved.polar();
  polar.col(1).setZero();
  const KernelBasis b(t, t, grid, polar, Eigen::MatrixXd::Zero(9, polar.cols()), solved.singular_values());
  const auto c = sample_basis_cartesian(b, 3);
  EXPECT_EQ(c.col(1).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_NEAR(c.col(0).norm(), 1.0, 1e-12);
}

TEST(ExpandKernel, ZeroOneHotAndShape) {
  const auto b = solve_basis_nullspace(Representation::trivial(8), Representation::regular(8), polar_grid(3, 8));
  const auto zero = expand_kernel(ad::Tensor::zeros({b.size()}), b);
  EXPECT_EQ(zero.shape(), (ad::Shape{8, 1, 3, 3}));
  for (double v : zero.values()) EXPECT_EQ(v, 0.0);
  for (std::size_t r : b.effective()) {
    auto w = ad::Tensor::zeros({b.size()});
    w.mutable_values()[r] = 1.0;
    const auto k = expand_kernel(w, b);
    for (std::size_t i = 0; i < k.size(); ++i)
      EXPECT_EQ(k.at(i), b.cartesian()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(r)));
  }
  EXPECT_THROW(expand_kernel(ad::Tensor::zeros({b.size() + 1}), b), steer::Error);
}

TEST(ExpandKernel, Linear) {
  const auto reg = Representation::regular(8);
  const auto b = solve_basis_nullspace(reg, reg, polar_grid(3, 8));
  const auto u = random_weights(b.size(), 5), v = random_weights(b.size(), 6);
  const double alpha = 1.7, beta = -0.4;
  std::vector<double> mix(b.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * u.at(i) + beta * v.at(i);
  const auto lhs = expand_kernel(ad::Tensor::from({b.size()}, mix), b);
  const auto ku = expand_kernel(u, b), kv = expand_kernel(v, b);
  double worst = 0.0, scale = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    const double r = alpha * ku.at(i) + beta * kv.at(i);
    worst = std::max(worst, std::abs(lhs.at(i) - r));
    scale = std::max(scale, std::abs(r));
  }
  EXPECT_LE(worst, 1e-12 * scale);
}

TEST(ExpandKernel, PolarExpansionStaysSteerable) {
  const auto reg = Representation::regular(8);
  const auto grid = polar_grid(3, 8);
  const auto b = solve_basis_nullspace(reg, Representation::irrep(8, 1), grid);
  const auto w = random_weights(b.size(), 7);
  const auto kernel = expand_polar(w.values(), b);
  EXPECT_LE(steerability_residual(reg, Representation::irrep(8, 1), grid, kernel), 1e-10);
}

TEST(ExpandKernel, QuarterTurnConvolutionIsExact) {
  // Holds for the exact Cartesian basis and for the Gaussian-sampled polar basis.
  const auto reg = Representation::regular(4);
  const steer::nn::FieldType field(4, {reg});
  const auto x = steer::test::random_tensor({1, 4, 12, 12}, 8);
  const GroupElement g(4, 1);
  for (const auto& b : {solve_basis_nullspace(reg, reg, cartesian_grid(3, 4)),
                        solve_basis_nullspace(reg, reg, polar_grid(3, 4))}) {
    const auto k = expand_kernel(random_weights(b.size(), 9), b);
    const auto lhs = ad::conv2d(steer::nn::rotate_field(x, field, g), k, 1);
    const auto rhs = steer::nn::rotate_field(ad::conv2d(x, k, 1), field, g);
    EXPECT_LE(steer::test::max_abs_diff(lhs, rhs), 1e-12);
  }
}

TEST(Cache, ReturnsSharedInstance) {
  const auto t = Representation::trivial(8);
  const auto reg = Representation::regular(8);
  const auto a = cached_basis(t, reg, 3);
  const auto b = cached_basis(t, reg, 3);
  EXPECT_EQ(a.get(), b.get());
  EXPECT_EQ(a->size(), solve_basis_nullspace(t, reg, polar_grid(3, 8)).size());
}
