#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "steer/ad/adam.hpp"
#include "steer/ad/grad_check.hpp"
#include "steer/ad/ops.hpp"
#include "steer/error.hpp"
#include "support/test_support.hpp"

using steer::Error;
using steer::ErrorKind;
using steer::ad::Tensor;
namespace ad = steer::ad;

namespace {

// Direct nested-loop cross-correlation with zero padding.
std::vector<double> naive_conv(const Tensor& x, const Tensor& k, std::size_t pad) {
  const std::size_t n = x.dim(0), cin = x.dim(1), h = x.dim(2), w = x.dim(3);
  const std::size_t cout = k.dim(0), s = k.dim(2);
  const std::size_t ho = h + 2 * pad - s + 1, wo = w + 2 * pad - s + 1;
  std::vector<double> out(n * cout * ho * wo, 0.0);
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t i = 0; i < ho; ++i)
        for (std::size_t j = 0; j < wo; ++j) {
          double acc = 0.0;
          for (std::size_t c = 0; c < cin; ++c)
            for (std::size_t u = 0; u < s; ++u)
              for (std::size_t v = 0; v < s; ++v) {
                const long r = static_cast<long>(i + u) - static_cast<long>(pad);
                const long q = static_cast<long>(j + v) - static_cast<long>(pad);
                if (r < 0 || q < 0 || r >= static_cast<long>(h) || q >= static_cast<long>(w)) continue;
                acc += k.at(((o * cin + c) * s + u) * s + v) * x.at(((b * cin + c) * h + r) * w + q);
              }
          out[((b * cout + o) * ho + i) * wo + j] = acc;
        }
  return out;
}

Tensor with_values(const Tensor& like, std::vector<double> v) { return Tensor::from(like.shape(), std::move(v)); }

}  // namespace

TEST(Conv2d, OneByOneKernelScales) {
  const auto x = steer::test::random_tensor({2, 1, 5, 7}, 1);
  const auto y = ad::conv2d(x, Tensor::full({1, 1, 1, 1}, 2.5), 0);
  ASSERT_EQ(y.shape(), x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_DOUBLE_EQ(y.at(i), 2.5 * x.at(i));
}

TEST(Conv2d, DeltaKernelIsIdentity) {
  const auto x = steer::test::random_tensor({1, 1, 6, 6}, 2);
  auto k = Tensor::zeros({1, 1, 3, 3});
  k.mutable_values()[4] = 1.0;
  const auto y = ad::conv2d(x, k, 1);
  for (std::size_t i = 0; i < x.size(); ++i) EXPECT_EQ(y.at(i), x.at(i));
}

TEST(Conv2d, OnesKernelSumsWindow) {
  const auto y = ad::conv2d(Tensor::full({1, 1, 5, 5}, 0.75), Tensor::full({1, 1, 3, 3}, 1.0), 1);
  EXPECT_DOUBLE_EQ(y.at(2 * 5 + 2), 9 * 0.75);
  EXPECT_DOUBLE_EQ(y.at(0), 4 * 0.75);
}

TEST(Conv2d, MatchesNestedLoops) {
  for (std::size_t pad : {0, 1, 2}) {
    const auto x = steer::test::random_tensor({2, 3, 7, 9}, 10 + pad);
    const auto k = steer::test::random_tensor({4, 3, 3, 3}, 20 + pad);
    const auto y = ad::conv2d(x, k, pad);
    const auto ref = naive_conv(x, k, pad);
    ASSERT_EQ(y.size(), ref.size());
    EXPECT_EQ(y.dim(2), 7 + 2 * pad - 2);
    for (std::size_t i = 0; i < ref.size(); ++i) EXPECT_NEAR(y.at(i), ref[i], 1e-13);
  }
}

TEST(Conv2d, Linear) {
  const auto a = steer::test::random_tensor({1, 2, 8, 8}, 3);
  const auto b = steer::test::random_tensor({1, 2, 8, 8}, 4);
  const auto k = steer::test::random_tensor({3, 2, 3, 3}, 5);
  const double alpha = 0.7, beta = -1.3;
  std::vector<double> mix(a.size());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * a.at(i) + beta * b.at(i);
  const auto lhs = ad::conv2d(with_values(a, mix), k, 1);
  const auto ya = ad::conv2d(a, k, 1), yb = ad::conv2d(b, k, 1);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    const double r = alpha * ya.at(i) + beta * yb.at(i);
    num += (lhs.at(i) - r) * (lhs.at(i) - r);
    den += r * r;
  }
  EXPECT_LE(std::sqrt(num / den), 1e-12);
}

TEST(Conv2d, ChannelMismatchThrows) {
  try {
    ad::conv2d(Tensor::zeros({1, 2, 4, 4}), Tensor::zeros({1, 3, 3, 3}), 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ShapeMismatch);
  }
  EXPECT_THROW(ad::conv2d(Tensor::zeros({1, 1, 4, 4}), Tensor::zeros({1, 1, 2, 2}), 1), Error);
}

TEST(Conv2d, AdjointMatchesFiniteDifferences) {
  auto x = steer::test::random_tensor({1, 2, 6, 6}, 6, -1, 1, true);
  auto k = steer::test::random_tensor({2, 2, 3, 3}, 7, -1, 1, true);
  const auto target = steer::test::random_tensor({1, 2, 6, 6}, 8);
  std::vector<Tensor> params{x, k};
  const auto result =
      ad::grad_check([&] { return ad::mse_loss(ad::conv2d(x, k, 1), target); }, params, {.samples = 72});
  EXPECT_LE(result.max_relative_error, 1e-7);
}

TEST(Relu, Values) {
  const auto y = ad::relu(Tensor::from({2}, {-1.0, 2.0}));
  EXPECT_EQ(y.at(0), 0.0);
  EXPECT_EQ(y.at(1), 2.0);
}

TEST(Relu, GradientPassesInLinearRegion) {
  auto x = Tensor::from({3}, {3.0, -2.0, 0.0}, true);
  ad::backward(ad::sum(ad::relu(x)));
  EXPECT_EQ(x.grad()[0], 1.0);
  EXPECT_EQ(x.grad()[1], 0.0);
  EXPECT_EQ(x.grad()[2], 0.0);
}

TEST(MseLoss, Values) {
  const auto a = steer::test::random_tensor({3, 4}, 9);
  EXPECT_EQ(ad::mse_loss(a, a).item(), 0.0);
  EXPECT_EQ(ad::mse_loss(Tensor::from({1}, {0.0}), Tensor::from({1}, {1.0})).item(), 1.0);
}

TEST(MseLoss, Gradient) {
  auto x = Tensor::from({1}, {3.0}, true);
  ad::backward(ad::mse_loss(x, Tensor::from({1}, {0.0})));
  EXPECT_DOUBLE_EQ(x.grad()[0], 6.0);
}

TEST(MseLoss, ShapeMismatchThrows) {
  EXPECT_THROW(ad::mse_loss(Tensor::zeros({2}), Tensor::zeros({3})), Error);
}

TEST(Backward, SumGivesOnes) {
  auto x = steer::test::random_tensor({4, 5}, 11, -1, 1, true);
  ad::backward(ad::sum(x));
  for (double g : x.grad()) EXPECT_EQ(g, 1.0);
}

TEST(Backward, UnreachedTensorHasZeroGradient) {
  auto x = steer::test::random_tensor({3}, 12, -1, 1, true);
  auto unused = steer::test::random_tensor({3}, 13, -1, 1, true);
  ad::backward(ad::sum(ad::mul(x, x)));
  for (double g : unused.grad()) EXPECT_EQ(g, 0.0);
}

TEST(Backward, NonScalarThrows) {
  auto x = steer::test::random_tensor({3}, 14, -1, 1, true);
  EXPECT_THROW(ad::backward(ad::relu(x)), Error);
}

TEST(Backward, RecordVisitsEachOpOnceAfterItsConsumers) {
  auto x = steer::test::random_tensor({1, 1, 5, 5}, 15, -1, 1, true);
  auto k = steer::test::random_tensor({1, 1, 3, 3}, 16, -1, 1, true);
  const auto h = ad::relu(ad::conv2d(x, k, 1));
  const auto loss = ad::add(ad::sum(h), ad::mse_loss(h, x));
  const auto record = ad::backward(loss);
  ASSERT_FALSE(record.entries.empty());
  EXPECT_EQ(record.entries.front().sequence, loss.sequence());
  std::set<std::uint64_t> seen;
  for (const auto& e : record.entries) {
    EXPECT_TRUE(seen.insert(e.sequence).second) << e.op;
    // Every input was created before the op that consumes it.
    for (auto in : e.input_sequences) EXPECT_LT(in, e.sequence);
    // Consumers are replayed first, so no already-visited entry is an input.
    for (auto in : e.input_sequences) EXPECT_FALSE(seen.count(in)) << e.op;
  }
}

TEST(Backward, CompositeGraphMatchesCentralDifferences) {
  auto x = steer::test::random_tensor({1, 1, 6, 6}, 17, -1, 1, true);
  auto k = steer::test::random_tensor({2, 1, 3, 3}, 18, -1, 1, true);
  auto k2 = steer::test::random_tensor({1, 2, 3, 3}, 19, -1, 1, true);
  const auto target = steer::test::random_tensor({1, 1, 6, 6}, 20);
  const auto loss_of = [&] { return ad::mse_loss(ad::conv2d(ad::relu(ad::conv2d(x, k, 1)), k2, 1), target); };
  ad::backward(loss_of());
  double worst = 0.0;
  for (Tensor* t : {&x, &k, &k2}) {
    const std::vector<double> analytic(t->grad().begin(), t->grad().end());
    for (std::size_t i = 0; i < t->size(); ++i) {
      const double v = t->at(i), step = 1e-6 * (1.0 + std::abs(v));
      t->mutable_values()[i] = v + step;
      const double up = loss_of().item();
      t->mutable_values()[i] = v - step;
      const double down = loss_of().item();
      t->mutable_values()[i] = v;
      const double numeric = (up - down) / (2 * step);
      worst = std::max(worst, std::abs(numeric - analytic[i]) / std::max({std::abs(numeric), std::abs(analytic[i]), 1e-8}));
    }
  }
  EXPECT_LE(worst, 1e-5);
}

TEST(Backward, BitwiseDeterministic) {
  const auto run = [] {
    auto x = steer::test::random_tensor({1, 2, 7, 7}, 21, -1, 1, true);
    auto k = steer::test::random_tensor({3, 2, 3, 3}, 22, -1, 1, true);
    const auto y = ad::relu(ad::conv2d(x, k, 1));
    ad::backward(ad::mse_loss(y, Tensor::zeros(y.shape())));
    std::vector<double> g(x.grad().begin(), x.grad().end());
    g.insert(g.end(), k.grad().begin(), k.grad().end());
    return g;
  };
  EXPECT_TRUE(steer::test::bitwise_equal(run(), run()));
}

TEST(Tensor, NonFiniteOpOutputThrows) {
  try {
    ad::scale(Tensor::from({1}, {1e308}), 1e10);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::NonFinite);
  }
}

TEST(Tensor, ValueCountMustMatchShape) {
  EXPECT_THROW(Tensor::from({2, 2}, {1.0, 2.0}), Error);
}

TEST(Adam, ZeroGradientLeavesParametersUnchanged) {
  auto p = steer::test::random_tensor({5}, 23, -1, 1, true);
  const std::vector<double> before(p.values().begin(), p.values().end());
  std::vector<Tensor> params{p};
  auto state = ad::AdamState::for_parameters(params);
  ad::adam_step(params, state, {});
  EXPECT_TRUE(steer::test::bitwise_equal(before, p.values()));
}

TEST(Adam, FirstStepMovesByLearningRate) {
  auto p = Tensor::from({2}, {0.5, -0.5}, true);
  p.mutable_grad()[0] = 3.0;
  p.mutable_grad()[1] = -0.2;
  std::vector<Tensor> params{p};
  auto state = ad::AdamState::for_parameters(params);
  ad::adam_step(params, state, {.learning_rate = 0.01});
  EXPECT_NEAR(p.at(0), 0.5 - 0.01, 1e-8);
  EXPECT_NEAR(p.at(1), -0.5 + 0.01, 1e-7);
}

TEST(Adam, TrajectoriesAreReproducible) {
  const auto trajectory = [] {
    auto w = steer::test::random_tensor({6}, 24, -1, 1, true);
    const auto target = steer::test::random_tensor({6}, 25);
    std::vector<Tensor> params{w};
    auto state = ad::AdamState::for_parameters(params);
    for (int i = 0; i < 20; ++i) {
      w.zero_grad();
      ad::backward(ad::mse_loss(ad::mul(w, w), target));
      ad::adam_step(params, state, {});
    }
    return std::vector<double>(w.values().begin(), w.values().end());
  };
  EXPECT_TRUE(steer::test::bitwise_equal(trajectory(), trajectory()));
}

TEST(Adam, StateMismatchThrows) {
  std::vector<Tensor> one{Tensor::zeros({2}, true)};
  auto state = ad::AdamState::for_parameters(one);
  std::vector<Tensor> two{Tensor::zeros({2}, true), Tensor::zeros({2}, true)};
  EXPECT_THROW(ad::adam_step(two, state, {}), Error);
}

TEST(GradCheck, LinearLossIsExact) {
  auto w = steer::test::random_tensor({50}, 26, -1, 1, true);
  const auto x = steer::test::random_tensor({50}, 27);
  std::vector<Tensor> params{w};
  // Central differences are exact on a linear loss for any step; a wide one keeps rounding out.
  const auto r = ad::grad_check([&] { return ad::sum(ad::mul(w, x)); }, params, {.samples = 50, .step_scale = 1e-3});
  EXPECT_LE(r.max_relative_error, 1e-9);
}

TEST(GradCheck, CorruptedAdjointIsCaught) {
  auto w = steer::test::random_tensor({20}, 28, 0.5, 1.5, true);
  std::vector<Tensor> params{w};
  // Squares its input but reports the adjoint of a cube.
  const auto bad_square = [](const Tensor& x) {
    std::vector<double> v(x.values().begin(), x.values().end());
    for (auto& e : v) e *= e;
    const std::vector<double> xs(x.values().begin(), x.values().end());
    return Tensor::make_op("bad_square", x.shape(), std::move(v), {x},
                           [xs](std::span<const double> g, std::span<std::vector<double>*> in) {
                             if (!in[0]) return;
                             for (std::size_t i = 0; i < xs.size(); ++i) (*in[0])[i] += g[i] * 3 * xs[i] * xs[i];
                           });
  };
  const auto r = ad::grad_check([&] { return ad::sum(bad_square(w)); }, params, {.samples = 20});
  EXPECT_GT(r.max_relative_error, 1e-2);
}
