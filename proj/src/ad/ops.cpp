#include "steer/ad/ops.hpp"

#include <Eigen/Core>
#include <algorithm>

#include "steer/error.hpp"

namespace steer::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw Error(ErrorKind::ShapeMismatch, std::string(op) + ": shapes " + shape_to_string(a.shape()) + " and " +
                                              shape_to_string(b.shape()) + " differ");
  }
}

// Direct convolution on a zero-padded copy. Each channel of the padded
// input is stored with stride `stride`, and the output is computed on the
// padded width, so every kernel tap is one GEMM over a contiguous slice:
//   wide[o][oy*wp + ox] += K[o][c][ky][kx] * pad[c][(oy+ky)*wp + ox + kx]
// Columns ox >= wo of the wide output are discarded.
struct ConvGeometry {
  std::size_t cin, h, w, k, pad, ho, wo;
  std::size_t wp() const { return w + 2 * pad; }
  std::size_t stride() const { return (h + 2 * pad) * wp() + k; }
  std::size_t wide() const { return ho * wp(); }
};

using StridedMap = Eigen::Map<const RowMatrix, 0, Eigen::OuterStride<>>;
using MutableStridedMap = Eigen::Map<RowMatrix, 0, Eigen::OuterStride<>>;

void pad_input(const double* image, const ConvGeometry& g, double* padded) {
  std::fill(padded, padded + g.cin * g.stride(), 0.0);
  for (std::size_t c = 0; c < g.cin; ++c)
    for (std::size_t y = 0; y < g.h; ++y) {
      const double* src = image + (c * g.h + y) * g.w;
      std::copy(src, src + g.w, padded + c * g.stride() + (y + g.pad) * g.wp() + g.pad);
    }
}

// taps[t] is the [cout, cin] matrix of kernel tap t = ky*k + kx.
std::vector<RowMatrix> kernel_taps(std::span<const double> kernel, std::size_t cout, std::size_t cin, std::size_t k) {
  std::vector<RowMatrix> taps(k * k, RowMatrix(cout, cin));
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t c = 0; c < cin; ++c)
      for (std::size_t t = 0; t < k * k; ++t) taps[t](o, c) = kernel[(o * cin + c) * k * k + t];
  return taps;
}

}  // namespace

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::size_t padding) {
  if (input.rank() != 4 || kernel.rank() != 4) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d expects input [N,C,H,W] and kernel [Cout,Cin,k,k]");
  }
  const std::size_t n = input.dim(0), cin = input.dim(1), h = input.dim(2), w = input.dim(3);
  const std::size_t cout = kernel.dim(0), k = kernel.dim(2);
  if (kernel.dim(1) != cin) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d: input has " + std::to_string(cin) + " channels, kernel expects " +
                                              std::to_string(kernel.dim(1)));
  }
  if (kernel.dim(3) != k || k % 2 == 0) {
    throw Error(ErrorKind::InvalidArgument, "conv2d: kernel must be square with odd size");
  }
  if (h + 2 * padding < k || w + 2 * padding < k) {
    throw Error(ErrorKind::ShapeMismatch, "conv2d: kernel larger than padded input");
  }
  const ConvGeometry g{cin, h, w, k, padding, h + 2 * padding - k + 1, w + 2 * padding - k + 1};
  const std::size_t plane = g.ho * g.wo, wide = g.wide();

  std::vector<double> out(n * cout * plane);
  std::vector<double> padded(cin * g.stride());
  RowMatrix acc(cout, wide);
  const auto taps = kernel_taps(kernel.values(), cout, cin, k);
  for (std::size_t b = 0; b < n; ++b) {
    pad_input(input.values().data() + b * cin * h * w, g, padded.data());
    acc.setZero();
    for (std::size_t ky = 0; ky < k; ++ky)
      for (std::size_t kx = 0; kx < k; ++kx) {
        StridedMap slice(padded.data() + ky * g.wp() + kx, cin, wide, Eigen::OuterStride<>(g.stride()));
        acc.noalias() += taps[ky * k + kx] * slice;
      }
    for (std::size_t o = 0; o < cout; ++o)
      for (std::size_t oy = 0; oy < g.ho; ++oy) {
        const double* src = acc.data() + o * wide + oy * g.wp();
        std::copy(src, src + g.wo, out.data() + (b * cout + o) * plane + oy * g.wo);
      }
  }

  return Tensor::make_op(
      "conv2d", {n, cout, g.ho, g.wo}, std::move(out), {input, kernel},
      [input, kernel, g, n, cout, plane, wide](std::span<const double> grad_out,
                                               std::span<std::vector<double>*> grad_in) {
        const std::size_t k = g.k;
        const auto taps = kernel_taps(kernel.values(), cout, g.cin, k);
        std::vector<double> padded(g.cin * g.stride()), dpadded;
        if (grad_in[0]) dpadded.resize(g.cin * g.stride());
        RowMatrix dwide = RowMatrix::Zero(static_cast<Eigen::Index>(cout), static_cast<Eigen::Index>(wide));
        RowMatrix dtap(cout, g.cin);
        for (std::size_t b = 0; b < n; ++b) {
          for (std::size_t o = 0; o < cout; ++o)
            for (std::size_t oy = 0; oy < g.ho; ++oy) {
              const double* src = grad_out.data() + (b * cout + o) * plane + oy * g.wo;
              std::copy(src, src + g.wo, dwide.data() + o * wide + oy * g.wp());
            }
          if (grad_in[1]) pad_input(input.values().data() + b * g.cin * g.h * g.w, g, padded.data());
          if (grad_in[0]) std::fill(dpadded.begin(), dpadded.end(), 0.0);
          for (std::size_t ky = 0; ky < k; ++ky)
            for (std::size_t kx = 0; kx < k; ++kx) {
              const std::size_t offset = ky * g.wp() + kx, t = ky * k + kx;
              if (grad_in[1]) {
                StridedMap slice(padded.data() + offset, g.cin, wide, Eigen::OuterStride<>(g.stride()));
                dtap.noalias() = dwide * slice.transpose();
                auto& gk = *grad_in[1];
                for (std::size_t o = 0; o < cout; ++o)
                  for (std::size_t c = 0; c < g.cin; ++c) gk[(o * g.cin + c) * k * k + t] += dtap(o, c);
              }
              if (grad_in[0]) {
                MutableStridedMap slice(dpadded.data() + offset, g.cin, wide, Eigen::OuterStride<>(g.stride()));
                slice.noalias() += taps[t].transpose() * dwide;
              }
            }
          if (grad_in[0]) {
            auto& gi = *grad_in[0];
            for (std::size_t c = 0; c < g.cin; ++c)
              for (std::size_t y = 0; y < g.h; ++y) {
                const double* src = dpadded.data() + c * g.stride() + (y + g.pad) * g.wp() + g.pad;
                double* dst = gi.data() + ((b * g.cin + c) * g.h + y) * g.w;
                for (std::size_t x = 0; x < g.w; ++x) dst[x] += src[x];
              }
          }
        }
      });
}

Tensor add_channel_bias(const Tensor& input, const Tensor& bias) {
  if (input.rank() != 4 || bias.size() != input.dim(1)) {
    throw Error(ErrorKind::ShapeMismatch, "add_channel_bias: bias of " + std::to_string(bias.size()) +
                                              " entries for input " + shape_to_string(input.shape()));
  }
  const std::size_t n = input.dim(0), c = input.dim(1), plane = input.dim(2) * input.dim(3);
  std::vector<double> out(input.values().begin(), input.values().end());
  auto bv = bias.values();
  for (std::size_t b = 0; b < n; ++b)
    for (std::size_t ch = 0; ch < c; ++ch)
      for (std::size_t i = 0; i < plane; ++i) out[(b * c + ch) * plane + i] += bv[ch];
  return Tensor::make_op("add_channel_bias", input.shape(), std::move(out), {input, bias},
                         [n, c, plane](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           if (grad_in[0]) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[0])[i] += g[i];
                           }
                           if (grad_in[1]) {
                             for (std::size_t b = 0; b < n; ++b)
                               for (std::size_t ch = 0; ch < c; ++ch) {
                                 double s = 0.0;
                                 for (std::size_t i = 0; i < plane; ++i) s += g[(b * c + ch) * plane + i];
                                 (*grad_in[1])[ch] += s;
                               }
                           }
                         });
}

Tensor relu(const Tensor& x) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
  return Tensor::make_op("relu", x.shape(), std::move(out), {x},
                         [x](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           auto xv = x.values();
                           auto& gi = *grad_in[0];
                           for (std::size_t i = 0; i < g.size(); ++i)
                             if (xv[i] > 0.0) gi[i] += g[i];
                         });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] + bv[i];
  return Tensor::make_op("add", a.shape(), std::move(out), {a, b},
                         [](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           for (auto* gi : grad_in)
                             if (gi)
                               for (std::size_t i = 0; i < g.size(); ++i) (*gi)[i] += g[i];
                         });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] - bv[i];
  return Tensor::make_op("sub", a.shape(), std::move(out), {a, b},
                         [](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           if (grad_in[0])
                             for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[0])[i] += g[i];
                           if (grad_in[1])
                             for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[1])[i] -= g[i];
                         });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mul");
  auto av = a.values(), bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return Tensor::make_op("mul", a.shape(), std::move(out), {a, b},
                         [a, b](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           auto av = a.values(), bv = b.values();
                           if (grad_in[0])
                             for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[0])[i] += g[i] * bv[i];
                           if (grad_in[1])
                             for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[1])[i] += g[i] * av[i];
                         });
}

Tensor scale(const Tensor& x, double factor) {
  auto xv = x.values();
  std::vector<double> out(xv.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = factor * xv[i];
  return Tensor::make_op("scale", x.shape(), std::move(out), {x},
                         [factor](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[0])[i] += factor * g[i];
                         });
}

Tensor sum(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  return Tensor::make_op("sum", {1}, {s}, {x},
                         [](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           for (auto& v : *grad_in[0]) v += g[0];
                         });
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_size(shape) != x.size()) {
    throw Error(ErrorKind::ShapeMismatch, "reshape " + shape_to_string(x.shape()) + " to " + shape_to_string(shape));
  }
  return Tensor::make_op("reshape", std::move(shape), std::vector<double>(x.values().begin(), x.values().end()), {x},
                         [](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           for (std::size_t i = 0; i < g.size(); ++i) (*grad_in[0])[i] += g[i];
                         });
}

Tensor mse_loss(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse_loss");
  auto av = a.values(), bv = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  const double n = static_cast<double>(av.size());
  return Tensor::make_op("mse_loss", {1}, {s / n}, {a, b},
                         [a, b, n](std::span<const double> g, std::span<std::vector<double>*> grad_in) {
                           auto av = a.values(), bv = b.values();
                           const double f = 2.0 * g[0] / n;
                           for (std::size_t i = 0; i < av.size(); ++i) {
                             const double d = f * (av[i] - bv[i]);
                             if (grad_in[0]) (*grad_in[0])[i] += d;
                             if (grad_in[1]) (*grad_in[1])[i] -= d;
                           }
                         });
}

}  // namespace steer::ad
