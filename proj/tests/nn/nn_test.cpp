#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <numbers>

#include "steer/ad/adam.hpp"
#include "steer/ad/grad_check.hpp"
#include "steer/ad/ops.hpp"
#include "steer/error.hpp"
#include "steer/imaging/rotate.hpp"
#include "steer/nn/network.hpp"
#include "support/test_support.hpp"

using namespace steer::nn;
using steer::groups::GroupElement;
using steer::groups::Representation;
namespace ad = steer::ad;

namespace {

std::vector<double> plane_rotated(const ad::Tensor& x, std::size_t plane_index, double angle) {
  const std::size_t h = x.dim(2), plane = h * h;
  std::vector<double> out(plane);
  steer::imaging::rotate_plane(x.values().subspan(plane_index * plane, plane), h, h, angle, out);
  return out;
}

void set_all(const Network& net, double value) {
  for (auto p : net.parameters()) std::fill(p.mutable_values().begin(), p.mutable_values().end(), value);
}

double field_mean(const ad::Tensor& y, const FieldType& f, std::size_t k) {
  const std::size_t plane = y.dim(2) * y.dim(3);
  double s = 0.0;
  for (std::size_t b = 0; b < y.dim(0); ++b)
    for (std::size_t c = f.offset(k); c < f.offset(k) + f.width(k); ++c)
      for (std::size_t q = 0; q < plane; ++q) s += y.at((b * y.dim(1) + c) * plane + q);
  return s / static_cast<double>(y.dim(0) * f.width(k) * plane);
}

double field_variance(const ad::Tensor& y, const FieldType& f, std::size_t k) {
  const double m = field_mean(y, f, k);
  const std::size_t plane = y.dim(2) * y.dim(3);
  double s = 0.0;
  for (std::size_t b = 0; b < y.dim(0); ++b)
    for (std::size_t c = f.offset(k); c < f.offset(k) + f.width(k); ++c)
      for (std::size_t q = 0; q < plane; ++q) {
        const double d = y.at((b * y.dim(1) + c) * plane + q) - m;
        s += d * d;
      }
  return s / static_cast<double>(y.dim(0) * f.width(k) * plane);
}

// Isotropic-free input with pixel-scale detail, so a generic CNN shows its
// orientation bias.
ad::Tensor rough_input(std::size_t n, std::uint64_t seed) { return steer::test::random_tensor({1, 1, n, n}, seed); }

}  // namespace

TEST(FieldType, ChannelsAndOffsets) {
  const FieldType f(8, {Representation::trivial(8), Representation::regular(8), Representation::irrep(8, 1)});
  EXPECT_EQ(f.channels(), 11u);
  EXPECT_EQ(f.offset(0), 0u);
  EXPECT_EQ(f.offset(1), 1u);
  EXPECT_EQ(f.offset(2), 9u);
  EXPECT_FALSE(f.all_permutation());
  EXPECT_THROW(FieldType(8, {Representation::trivial(4)}), steer::Error);
}

TEST(RotateField, IdentityLeavesInputUnchanged) {
  const auto f = FieldType::regular(8, 2);
  const auto x = steer::test::random_tensor({2, 16, 9, 9}, 1);
  EXPECT_TRUE(steer::test::bitwise_equal(rotate_field(x, f, GroupElement(8, 0)).values(), x.values()));
}

TEST(RotateField, QuarterTurnOfTrivialField) {
  const auto x = steer::test::random_tensor({1, 1, 10, 10}, 2);
  const auto y = rotate_field(x, FieldType::trivial(4), GroupElement(4, 1));
  const auto ref = plane_rotated(x, 0, std::numbers::pi / 2);
  for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-12);
  // Exact permutation: the multiset of values is unchanged.
  std::vector<double> a(x.values().begin(), x.values().end()), b(y.values().begin(), y.values().end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  EXPECT_EQ(a, b);
}

TEST(RotateField, RegularFieldShiftsChannelsAndRotatesPlanes) {
  const auto x = steer::test::random_tensor({1, 8, 15, 15}, 3);
  const auto f = FieldType::regular(8, 1);
  const std::size_t plane = 15 * 15;
  for (int k = 1; k < 8; ++k) {
    const auto y = rotate_field(x, f, GroupElement(8, k));
    for (std::size_t c = 0; c < 8; ++c) {
      const auto ref = plane_rotated(x, c, 2 * std::numbers::pi * k / 8);
      const std::size_t dst = (c + static_cast<std::size_t>(k)) % 8;
      for (std::size_t q = 0; q < plane; ++q) EXPECT_NEAR(y.at(dst * plane + q), ref[q], 1e-12);
    }
  }
}

TEST(RotateField, ChannelMismatchThrows) {
  EXPECT_THROW(rotate_field(ad::Tensor::zeros({1, 3, 4, 4}), FieldType::regular(4, 1), GroupElement(4, 1)),
               steer::Error);
}

TEST(FieldBatchNorm, ConstantInputGivesZero) {
  const auto f = FieldType::regular(4, 2);
  const FieldBatchNorm bn(f);
  const auto y = bn.forward(ad::Tensor::full({2, 8, 5, 5}, 3.7));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(FieldBatchNorm, PooledMeanZeroVarianceOne) {
  const FieldType f(4, {Representation::regular(4), Representation::trivial(4), Representation::regular(4)});
  const FieldBatchNorm bn(f);
  const auto x = steer::test::random_tensor({2, 9, 8, 8}, 4, -10.0, 30.0);
  const auto y = bn.forward(x);
  for (std::size_t k = 0; k < f.size(); ++k) {
    EXPECT_NEAR(field_mean(y, f, k), 0.0, 1e-12);
    EXPECT_NEAR(field_variance(y, f, k), 1.0, 1e-6);
  }
}

TEST(FieldBatchNorm, CommutesWithQuarterTurns) {
  const auto f = FieldType::regular(4, 3);
  const FieldBatchNorm bn(f);
  auto scale = bn.scale();
  scale.mutable_values()[1] = -0.6;
  const auto x = steer::test::random_tensor({1, 12, 11, 11}, 5, -2.0, 3.0);
  for (int k = 1; k < 4; ++k) {
    const GroupElement g(4, k);
    const auto lhs = bn.forward(rotate_field(x, f, g));
    const auto rhs = rotate_field(bn.forward(x), f, g);
    EXPECT_LE(steer::test::max_abs_diff(lhs, rhs), 1e-12);
  }
}

TEST(ReLU, CommutesWithRegularPermutations) {
  const auto reg = Representation::regular(8);
  const auto v = steer::test::random_tensor({8}, 6);
  const Eigen::Map<const Eigen::VectorXd> vv(v.values().data(), 8);
  for (int k = 0; k < 8; ++k) {
    const Eigen::VectorXd pv = reg.matrix(k) * vv;
    const auto lhs = ad::relu(ad::Tensor::from({8}, std::vector<double>(pv.data(), pv.data() + 8)));
    const auto rv = ad::relu(v);
    const Eigen::VectorXd rhs = reg.matrix(k) * Eigen::Map<const Eigen::VectorXd>(rv.values().data(), 8);
    for (int i = 0; i < 8; ++i) EXPECT_LE(std::abs(lhs.at(i) - rhs(i)), 1e-15);
  }
}

TEST(ReLU, RefusesNonPermutationFields) {
  EXPECT_THROW(ReLU(FieldType(8, {Representation::irrep(8, 1)})), steer::Error);
  EXPECT_NO_THROW(ReLU(FieldType::regular(8, 2)));
}

TEST(Scnn, ChannelCountsAndShape) {
  const auto net = build_scnn(8, 8, 0);
  std::vector<std::size_t> convs;
  for (const auto& l : net.layers())
    if (l->kind() == "steerable_conv") {
      if (convs.empty()) convs.push_back(l->in_channels());
      convs.push_back(l->out_channels());
    }
  EXPECT_EQ(convs, (std::vector<std::size_t>{1, 64, 64, 1}));
  const auto y = net.forward(steer::test::random_tensor({1, 1, 64, 64}, 7));
  EXPECT_EQ(y.shape(), (ad::Shape{1, 1, 64, 64}));
}

TEST(Scnn, KernelSizes) {
  const auto net = build_scnn(8, 2, 0);
  std::vector<int> sizes;
  for (const auto& l : net.layers())
    if (const auto* c = dynamic_cast<const SteerableConv*>(l.get())) sizes.push_back(c->kernel_size());
  EXPECT_EQ(sizes, (std::vector<int>{3, 3, 1}));
}

TEST(Scnn, ZeroWeightsGiveZeroOutput) {
  const auto net = build_scnn(8, 4, 1);
  set_all(net, 0.0);
  const auto y = net.forward(steer::test::random_tensor({1, 1, 12, 12}, 8));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Scnn, BackwardReachesEveryParameter) {
  const auto net = build_scnn(8, 2, 2);
  const auto x = steer::test::random_tensor({1, 1, 10, 10}, 9);
  ad::backward(ad::mse_loss(net.forward(x), x));
  for (const auto& p : net.parameters()) {
    double mag = 0.0;
    for (double g : p.grad()) mag += std::abs(g);
    EXPECT_GT(mag, 0.0);
  }
}

TEST(Scnn, GradientMatchesFiniteDifferences) {
  const auto net = build_scnn(8, 2, 3);
  const auto x = steer::test::random_tensor({1, 1, 12, 12}, 10);
  auto params = net.parameters();
  const auto r = ad::grad_check([&] { return ad::mse_loss(net.forward(x), x); }, params, {.samples = 100, .seed = 1});
  EXPECT_LE(r.max_relative_error, 1e-5);
}

TEST(Scnn, SingleConvLayerIsLinear) {
  std::mt19937_64 rng(4);
  const SteerableConv conv(FieldType::trivial(8), FieldType::regular(8, 2), 3, false, rng);
  const auto x = steer::test::random_tensor({1, 1, 9, 9}, 11);
  const auto y1 = conv.forward(x), y2 = conv.forward(ad::scale(x, 2.0));
  for (std::size_t i = 0; i < y1.size(); ++i) EXPECT_NEAR(y2.at(i), 2.0 * y1.at(i), 1e-14);
}

TEST(Scnn, QuarterTurnEquivarianceIsExact) {
  const auto net = build_scnn(8, 8, 5);
  const auto x = steer::test::smooth_input(64, 12);
  for (int k : {2, 4, 6}) EXPECT_LE(equivariance_error(net, x, GroupElement(8, k)), 1e-6) << k;
  EXPECT_EQ(equivariance_error(net, x, GroupElement(8, 0)), 0.0);
}

TEST(Scnn, FortyFiveDegreeErrorIsInterpolationLimited) {
  const auto net = build_scnn(8, 8, 6);
  const auto x = steer::test::smooth_input(64, 13);
  EXPECT_LE(equivariance_error(net, x, GroupElement(8, 1)), 5e-2);
}

TEST(Scnn, KernelsStaySteerableDuringTraining) {
  const auto net = build_scnn(8, 2, 7);
  const auto x = steer::test::random_tensor({1, 1, 12, 12}, 14);
  const auto target = steer::test::random_tensor({1, 1, 12, 12}, 15);
  auto params = net.parameters();
  auto state = ad::AdamState::for_parameters(params);
  for (int step = 0; step < 100; ++step) {
    for (auto& p : params) p.zero_grad();
    ad::backward(ad::mse_loss(net.forward(x), target));
    ad::adam_step(params, state, {.learning_rate = 1e-2});
  }
  for (const auto& l : net.layers()) {
    const auto* conv = dynamic_cast<const SteerableConv*>(l.get());
    if (!conv) continue;
    for (std::size_t o = 0; o < conv->out_field().size(); ++o)
      for (std::size_t i = 0; i < conv->in_field().size(); ++i) {
        const auto& b = conv->pair_basis(o, i);
        const auto kernel = steer::basis::expand_polar(conv->weight(o, i).values(), b);
        EXPECT_LE(steer::basis::steerability_residual(b.rep_in(), b.rep_out(), b.grid(), kernel), 1e-10);
      }
  }
}

TEST(Cnn, ParameterCount) {
  const auto net = build_baseline_cnn(0);
  EXPECT_EQ(net.parameter_count(), 9u * (64 + 3 * 64 * 64 + 64) + (4 * 64 + 1));
}

TEST(Cnn, ShapePreservingOnRectangles) {
  const auto net = build_baseline_cnn(1, 8);
  EXPECT_EQ(net.forward(steer::test::random_tensor({1, 1, 7, 13}, 16)).shape(), (ad::Shape{1, 1, 7, 13}));
}

TEST(Cnn, ZeroWeightsGiveZeroOutput) {
  const auto net = build_baseline_cnn(2, 8);
  set_all(net, 0.0);
  const auto y = net.forward(steer::test::random_tensor({1, 1, 6, 6}, 17));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(Cnn, QuarterTurnControlIsNotEquivariant) {
  std::vector<double> errors;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto net = build_baseline_cnn(seed);
    errors.push_back(equivariance_error(net, rough_input(32, 100 + seed), GroupElement(4, 1)));
  }
  std::nth_element(errors.begin(), errors.begin() + 10, errors.end());
  EXPECT_GT(errors[10], 0.1);
}

TEST(Network, WeightsRoundTripBitwise) {
  const auto dir = std::filesystem::temp_directory_path() / "steer_nn_test_weights";
  std::filesystem::create_directories(dir);
  const auto a = build_scnn(8, 2, 8);
  save_weights(a, dir / "scnn");
  auto b = build_scnn(8, 2, 9);
  load_weights(b, dir / "scnn");
  const auto pa = a.parameters(), pb = b.parameters();
  ASSERT_EQ(pa.size(), pb.size());
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_TRUE(steer::test::bitwise_equal(pa[k].values(), pb[k].values()));
  auto cnn = build_baseline_cnn(0, 8);
  EXPECT_THROW(load_weights(cnn, dir / "scnn"), steer::Error);
  std::filesystem::remove_all(dir);
}

TEST(Network, SameSeedSameWeights) {
  const auto a = build_scnn(8, 2, 11), b = build_scnn(8, 2, 11);
  const auto pa = a.parameters(), pb = b.parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_TRUE(steer::test::bitwise_equal(pa[k].values(), pb[k].values()));
}
