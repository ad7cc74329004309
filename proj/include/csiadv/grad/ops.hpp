#pragma once

// Forward and backward kernels for the five layer types plus the loss.
// Kernels are free functions over Tensor<Scalar>; the tape in tape.hpp wires
// them into a reverse-mode graph. Reductions accumulate per row/plane in the
// tensor's scalar type and across rows/planes in double.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "csiadv/errors.hpp"
#include "csiadv/grad/tensor.hpp"

namespace csiadv::grad {

namespace detail {

// Scratch buffers share the tensors' alignment so kernel results do not
// depend on where the allocator happened to place them.
template <typename Scalar>
using Workspace = std::vector<Scalar, AlignedAllocator<Scalar>>;

inline void require(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

/// Splits an activation into (batch, row length) for rank-1 or rank-2 input.
inline std::pair<std::size_t, std::size_t> as_rows(const Shape& s, const char* op) {
  if (s.size() == 1) return {1, s[0]};
  if (s.size() == 2) return {s[0], s[1]};
  throw DimensionError(std::string(op) + ": expected rank 1 or 2 input, got " + shape_string(s));
}

struct ImageDims {
  std::size_t batch, channels, height, width;
  std::size_t plane() const { return height * width; }
};

inline ImageDims as_images(const Shape& s, const char* op) {
  if (s.size() == 3) return {1, s[0], s[1], s[2]};
  if (s.size() == 4) return {s[0], s[1], s[2], s[3]};
  throw DimensionError(std::string(op) + ": expected C×H×W or B×C×H×W input, got " +
                       shape_string(s));
}

inline Shape image_shape(const Shape& like, std::size_t channels) {
  Shape out = like;
  out[out.size() - 3] = channels;
  return out;
}

// Unrolls 3×3 same-padded patches of one C×H×W image into a (C·9)×(H·W) matrix.
template <typename Scalar>
void im2col3x3(const Scalar* image, std::size_t channels, std::size_t height, std::size_t width,
               Scalar* col) {
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    const Scalar* src = image + c * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        Scalar* dst = col + ((c * 9) + static_cast<std::size_t>(ky * 3 + kx)) * plane;
        // valid output columns x satisfy 0 <= x + kx - 1 < width
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? width - 1 : width;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          Scalar* row = dst + y * width;
          if (sy < 0 || sy >= static_cast<long>(height)) {
            std::fill(row, row + width, Scalar(0));
            continue;
          }
          const Scalar* srow = src + static_cast<std::size_t>(sy) * width + x0 + kx - 1;
          std::fill(row, row + x0, Scalar(0));
          std::copy(srow, srow + (x1 - x0), row + x0);
          std::fill(row + x1, row + width, Scalar(0));
        }
      }
    }
  }
}

// Adjoint of im2col3x3: scatters column gradients back into the image gradient.
template <typename Scalar>
void col2im3x3_add(const Scalar* col, std::size_t channels, std::size_t height, std::size_t width,
                   Scalar* image) {
  const std::size_t plane = height * width;
  for (std::size_t c = 0; c < channels; ++c) {
    Scalar* dst = image + c * plane;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const Scalar* src = col + ((c * 9) + static_cast<std::size_t>(ky * 3 + kx)) * plane;
        const std::size_t x0 = kx == 0 ? 1 : 0;
        const std::size_t x1 = kx == 2 ? width - 1 : width;
        for (std::size_t y = 0; y < height; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(height)) continue;
          Scalar* drow = dst + static_cast<std::size_t>(sy) * width + x0 + kx - 1;
          const Scalar* srow = src + y * width + x0;
          for (std::size_t i = 0; i < x1 - x0; ++i) drow[i] += srow[i];
        }
      }
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dense

/// out[i] = sum_j W[i,j] x[j] + b[i]; x may carry a leading batch axis.
template <typename Scalar>
Tensor<Scalar> dense_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights,
                             const Tensor<Scalar>& bias) {
  const auto [batch, in] = detail::as_rows(x.shape(), "dense");
  detail::require(weights.rank() == 2 && weights.dim(1) == in,
                  "dense: weights " + shape_string(weights.shape()) + " do not accept input " +
                      shape_string(x.shape()));
  const std::size_t out = weights.dim(0);
  detail::require(bias.rank() == 1 && bias.dim(0) == out,
                  "dense: bias " + shape_string(bias.shape()) + " does not match weights " +
                      shape_string(weights.shape()));
  Tensor<Scalar> y(x.rank() == 1 ? Shape{out} : Shape{batch, out});
  auto ym = y.matrix(batch, out);
  ym.noalias() = x.matrix(batch, in) * weights.matrix(out, in).transpose();
  ym.rowwise() += bias.vec().transpose();
  return y;
}

/// Accumulates into whichever of dx / dweights / dbias is non-null.
template <typename Scalar>
void dense_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& weights,
                    const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Tensor<Scalar>* dweights,
                    Tensor<Scalar>* dbias) {
  const auto [batch, in] = detail::as_rows(x.shape(), "dense");
  const std::size_t out = weights.dim(0);
  const auto dym = dy.matrix(batch, out);
  if (dx) dx->matrix(batch, in).noalias() += dym * weights.matrix(out, in);
  if (dweights) dweights->matrix(out, in).noalias() += dym.transpose() * x.matrix(batch, in);
  if (dbias) {
    for (std::size_t o = 0; o < out; ++o) {
      double acc = 0.0;
      for (std::size_t n = 0; n < batch; ++n) acc += static_cast<double>(dym(n, o));
      (*dbias)[o] += static_cast<Scalar>(acc);
    }
  }
}

// ---------------------------------------------------------------------------
// 3×3 same-padded convolution (cross-correlation)

namespace detail {

template <typename Scalar>
Tensor<Scalar> conv2d_forward_gemm(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                                   const Tensor<Scalar>& bias) {
  const auto d = detail::as_images(x.shape(), "conv2d");
  const std::size_t filters = kernels.dim(0);
  const std::size_t plane = d.plane();
  const std::size_t patch = d.channels * 9;
  Tensor<Scalar> y(detail::image_shape(x.shape(), filters));
  Workspace<Scalar> col(patch * plane);
  const auto k = kernels.matrix(filters, patch);
  for (std::size_t n = 0; n < d.batch; ++n) {
    detail::im2col3x3(x.data() + n * d.channels * plane, d.channels, d.height, d.width, col.data());
    Eigen::Map<const RowMatrix<Scalar>> colm(col.data(), static_cast<Eigen::Index>(patch),
                                             static_cast<Eigen::Index>(plane));
    Eigen::Map<RowMatrix<Scalar>> ym(y.data() + n * filters * plane,
                                     static_cast<Eigen::Index>(filters),
                                     static_cast<Eigen::Index>(plane));
    ym.noalias() = k * colm;
    ym.colwise() += bias.vec();
  }
  return y;
}

template <typename Scalar>
void conv2d_backward_gemm(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                          const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Tensor<Scalar>* dkernels,
                          Tensor<Scalar>* dbias) {
  const auto d = detail::as_images(x.shape(), "conv2d");
  const std::size_t filters = kernels.dim(0);
  const std::size_t plane = d.plane();
  const std::size_t patch = d.channels * 9;
  const auto k = kernels.matrix(filters, patch);
  Workspace<Scalar> col(patch * plane);
  Workspace<Scalar> dcol(dx ? patch * plane : 0);
  std::vector<double> bias_acc(filters, 0.0);
  for (std::size_t n = 0; n < d.batch; ++n) {
    Eigen::Map<const RowMatrix<Scalar>> dym(dy.data() + n * filters * plane,
                                            static_cast<Eigen::Index>(filters),
                                            static_cast<Eigen::Index>(plane));
    if (dkernels) {
      detail::im2col3x3(x.data() + n * d.channels * plane, d.channels, d.height, d.width,
                        col.data());
      Eigen::Map<const RowMatrix<Scalar>> colm(col.data(), static_cast<Eigen::Index>(patch),
                                               static_cast<Eigen::Index>(plane));
      dkernels->matrix(filters, patch).noalias() += dym * colm.transpose();
    }
    if (dx) {
      Eigen::Map<RowMatrix<Scalar>> dcolm(dcol.data(), static_cast<Eigen::Index>(patch),
                                          static_cast<Eigen::Index>(plane));
      dcolm.noalias() = k.transpose() * dym;
      detail::col2im3x3_add(dcol.data(), d.channels, d.height, d.width,
                            dx->data() + n * d.channels * plane);
    }
    if (dbias) {
      for (std::size_t f = 0; f < filters; ++f) {
        const Scalar* row = dym.data() + f * plane;
        double acc = 0.0;
        for (std::size_t i = 0; i < plane; ++i) acc += static_cast<double>(row[i]);
        bias_acc[f] += acc;
      }
    }
  }
  if (dbias) {
    for (std::size_t f = 0; f < filters; ++f) (*dbias)[f] += static_cast<Scalar>(bias_acc[f]);
  }
}

// Tap-wise kernels on zero-padded planes: nine F×C by C×(H·(W+2)) products per
// sample, one per kernel tap. Output rows are computed W+2 wide and the two
// junk columns are dropped. Faster than im2col when F is much smaller than C.

template <typename Scalar>
void pad_planes(const Scalar* src, std::size_t channels, std::size_t h, std::size_t w,
                Scalar* dst) {
  const std::size_t pw = w + 2;
  const std::size_t pp = (h + 2) * pw;
  std::fill(dst, dst + channels * pp, Scalar(0));
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t y = 0; y < h; ++y) {
      const Scalar* row = src + (c * h + y) * w;
      std::copy(row, row + w, dst + c * pp + (y + 1) * pw + 1);
    }
  }
}

template <typename Scalar>
std::array<RowMatrix<Scalar>, 9> split_taps(const Tensor<Scalar>& kernels) {
  const std::size_t filters = kernels.dim(0);
  const std::size_t channels = kernels.dim(1);
  std::array<RowMatrix<Scalar>, 9> taps;
  for (std::size_t t = 0; t < 9; ++t) {
    taps[t].resize(static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(channels));
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t c = 0; c < channels; ++c) {
        taps[t](static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(c)) =
            kernels[(f * channels + c) * 9 + t];
      }
    }
  }
  return taps;
}

template <typename Scalar>
Tensor<Scalar> conv2d_forward_taps(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                                   const Tensor<Scalar>& bias) {
  const auto d = detail::as_images(x.shape(), "conv2d");
  const std::size_t filters = kernels.dim(0);
  const std::size_t c = d.channels, h = d.height, w = d.width;
  const std::size_t pw = w + 2, pp = (h + 2) * pw, wide = h * pw - 2;
  Tensor<Scalar> y(detail::image_shape(x.shape(), filters));
  Workspace<Scalar> padded(c * pp);
  Workspace<Scalar> out(filters * h * pw);
  const auto taps = split_taps(kernels);
  using Strided = Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;
  for (std::size_t n = 0; n < d.batch; ++n) {
    pad_planes(x.data() + n * c * h * w, c, h, w, padded.data());
    Eigen::Map<RowMatrix<Scalar>> om(out.data(), static_cast<Eigen::Index>(filters),
                                     static_cast<Eigen::Index>(h * pw));
    auto ow = om.leftCols(static_cast<Eigen::Index>(wide));
    for (std::size_t f = 0; f < filters; ++f) ow.row(static_cast<Eigen::Index>(f)).setConstant(bias[f]);
    for (std::size_t t = 0; t < 9; ++t) {
      Strided xs(padded.data() + (t / 3) * pw + t % 3, static_cast<Eigen::Index>(c),
                 static_cast<Eigen::Index>(wide), Eigen::OuterStride<>(static_cast<Eigen::Index>(pp)));
      ow.noalias() += taps[t] * xs;
    }
    Scalar* dst = y.data() + n * filters * h * w;
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t r = 0; r < h; ++r) {
        const Scalar* row = out.data() + (f * h + r) * pw;
        std::copy(row, row + w, dst + (f * h + r) * w);
      }
    }
  }
  return y;
}

template <typename Scalar>
void conv2d_backward_taps(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                          const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Tensor<Scalar>* dkernels,
                          Tensor<Scalar>* dbias) {
  const auto d = detail::as_images(x.shape(), "conv2d");
  const std::size_t filters = kernels.dim(0);
  const std::size_t c = d.channels, h = d.height, w = d.width;
  const std::size_t pw = w + 2, pp = (h + 2) * pw, wide = h * pw - 2;
  Workspace<Scalar> padded(c * pp);
  Workspace<Scalar> dpad(dx ? c * pp : 0);
  Workspace<Scalar> gw(filters * h * pw, Scalar(0));
  const auto taps = split_taps(kernels);
  std::array<RowMatrix<Scalar>, 9> dtaps;
  for (auto& m : dtaps) {
    m = RowMatrix<Scalar>::Zero(static_cast<Eigen::Index>(filters), static_cast<Eigen::Index>(c));
  }
  std::vector<double> bias_acc(filters, 0.0);
  using Strided = Eigen::Map<const RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;
  using StridedMut = Eigen::Map<RowMatrix<Scalar>, 0, Eigen::OuterStride<>>;
  const auto stride = Eigen::OuterStride<>(static_cast<Eigen::Index>(pp));
  for (std::size_t n = 0; n < d.batch; ++n) {
    const Scalar* g = dy.data() + n * filters * h * w;
    for (std::size_t f = 0; f < filters; ++f) {
      for (std::size_t r = 0; r < h; ++r) {
        const Scalar* row = g + (f * h + r) * w;
        std::copy(row, row + w, gw.data() + (f * h + r) * pw);
      }
    }
    Eigen::Map<const RowMatrix<Scalar>> gm(gw.data(), static_cast<Eigen::Index>(filters),
                                           static_cast<Eigen::Index>(h * pw));
    const auto gwide = gm.leftCols(static_cast<Eigen::Index>(wide));
    if (dbias) {
      for (std::size_t f = 0; f < filters; ++f) {
        bias_acc[f] += static_cast<double>(gwide.row(static_cast<Eigen::Index>(f)).sum());
      }
    }
    if (dkernels) {
      pad_planes(x.data() + n * c * h * w, c, h, w, padded.data());
      for (std::size_t t = 0; t < 9; ++t) {
        Strided xs(padded.data() + (t / 3) * pw + t % 3, static_cast<Eigen::Index>(c),
                   static_cast<Eigen::Index>(wide), stride);
        dtaps[t].noalias() += gwide * xs.transpose();
      }
    }
    if (dx) {
      std::fill(dpad.begin(), dpad.end(), Scalar(0));
      for (std::size_t t = 0; t < 9; ++t) {
        StridedMut ds(dpad.data() + (t / 3) * pw + t % 3, static_cast<Eigen::Index>(c),
                      static_cast<Eigen::Index>(wide), stride);
        ds.noalias() += taps[t].transpose() * gwide;
      }
      Scalar* out = dx->data() + n * c * h * w;
      for (std::size_t ch = 0; ch < c; ++ch) {
        for (std::size_t r = 0; r < h; ++r) {
          const Scalar* src = dpad.data() + ch * pp + (r + 1) * pw + 1;
          Scalar* o = out + (ch * h + r) * w;
          for (std::size_t i = 0; i < w; ++i) o[i] += src[i];
        }
      }
    }
  }
  if (dkernels) {
    for (std::size_t t = 0; t < 9; ++t) {
      for (std::size_t f = 0; f < filters; ++f) {
        for (std::size_t ch = 0; ch < c; ++ch) {
          (*dkernels)[(f * c + ch) * 9 + t] +=
              dtaps[t](static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(ch));
        }
      }
    }
  }
  if (dbias) {
    for (std::size_t f = 0; f < filters; ++f) (*dbias)[f] += static_cast<Scalar>(bias_acc[f]);
  }
}

enum class ConvPath { kIm2col, kTaps };

// Tap-wise wins for channel-reducing layers (e.g. 16 -> 2).
inline ConvPath choose_conv_path(std::size_t filters, std::size_t channels) {
  return channels >= 4 * filters ? ConvPath::kTaps : ConvPath::kIm2col;
}

}  // namespace detail

/// 3×3 same-padded cross-correlation plus per-filter bias.
template <typename Scalar>
Tensor<Scalar> conv2d_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                              const Tensor<Scalar>& bias,
                              std::optional<detail::ConvPath> path = std::nullopt) {
  const auto d = detail::as_images(x.shape(), "conv2d");
  detail::require(kernels.rank() == 4 && kernels.dim(2) == 3 && kernels.dim(3) == 3,
                  "conv2d: kernels must be F×C×3×3, got " + shape_string(kernels.shape()));
  detail::require(kernels.dim(1) == d.channels,
                  "conv2d: kernels " + shape_string(kernels.shape()) + " expect " +
                      std::to_string(kernels.dim(1)) + " channels, input " +
                      shape_string(x.shape()) + " has " + std::to_string(d.channels));
  const std::size_t filters = kernels.dim(0);
  detail::require(bias.rank() == 1 && bias.dim(0) == filters,
                  "conv2d: bias " + shape_string(bias.shape()) + " does not match " +
                      std::to_string(filters) + " filters");
  if (path.value_or(detail::choose_conv_path(filters, d.channels)) == detail::ConvPath::kTaps) {
    return detail::conv2d_forward_taps(x, kernels, bias);
  }
  return detail::conv2d_forward_gemm(x, kernels, bias);
}

/// Accumulates into whichever of dx / dkernels / dbias is non-null.
template <typename Scalar>
void conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                     const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Tensor<Scalar>* dkernels,
                     Tensor<Scalar>* dbias, std::optional<detail::ConvPath> path = std::nullopt) {
  const auto d = detail::as_images(x.shape(), "conv2d");
  const std::size_t filters = kernels.dim(0);
  detail::require(dy.shape() == detail::image_shape(x.shape(), filters),
                  "conv2d backward: gradient " + shape_string(dy.shape()) +
                      " does not match output of " + std::to_string(filters) + " filters");
  if (path.value_or(detail::choose_conv_path(filters, d.channels)) == detail::ConvPath::kTaps) {
    detail::conv2d_backward_taps(x, kernels, dy, dx, dkernels, dbias);
  } else {
    detail::conv2d_backward_gemm(x, kernels, dy, dx, dkernels, dbias);
  }
}

// ---------------------------------------------------------------------------
// Activations

/// max(x, alpha x), which equals the leaky ReLU for alpha in (0,1).
template <typename Scalar>
Tensor<Scalar> leaky_relu(const Tensor<Scalar>& x, Scalar alpha) {
  Tensor<Scalar> y(x.shape());
  y.vec().array() = x.vec().array().cwiseMax(alpha * x.vec().array());
  return y;
}

template <typename Scalar>
void leaky_relu_backward(const Tensor<Scalar>& x, Scalar alpha, const Tensor<Scalar>& dy,
                         Tensor<Scalar>& dx) {
  const Scalar* __restrict xs = x.data();
  const Scalar* __restrict g = dy.data();
  Scalar* __restrict out = dx.data();
  const std::size_t n = x.size();
  for (std::size_t i = 0; i < n; ++i) out[i] += g[i] * (xs[i] >= Scalar(0) ? Scalar(1) : alpha);
}

template <typename Scalar>
Scalar sigmoid(Scalar v) {
  return Scalar(1) / (Scalar(1) + std::exp(-v));
}

// exp(-x) overflows to +inf for very negative x, which still yields exactly 0.
template <typename Scalar>
Tensor<Scalar> sigmoid(const Tensor<Scalar>& x) {
  Tensor<Scalar> y(x.shape());
  y.vec().array() = (Scalar(1) + (-x.vec().array()).exp()).inverse();
  return y;
}

/// Uses the forward output: d/dx sigmoid = y (1 - y).
template <typename Scalar>
void sigmoid_backward(const Tensor<Scalar>& y, const Tensor<Scalar>& dy, Tensor<Scalar>& dx) {
  dx.vec().array() += dy.vec().array() * y.vec().array() * (Scalar(1) - y.vec().array());
}

// ---------------------------------------------------------------------------
// Batch normalization (per channel over batch and spatial axes)

enum class BnMode { kTrain, kInfer };

template <typename Scalar>
struct BatchNormStats {
  BatchNormStats() = default;
  explicit BatchNormStats(std::size_t channels)
      : mean(Shape{channels}, Scalar(0)), var(Shape{channels}, Scalar(1)) {}

  /// Running statistics at the conventional starting point (mean 0, var 1),
  /// marked usable for inference.
  static BatchNormStats identity(std::size_t channels) {
    BatchNormStats s(channels);
    s.initialized = true;
    return s;
  }

  Tensor<Scalar> mean;
  Tensor<Scalar> var;
  bool initialized = false;
  double momentum = 0.9;
  double epsilon = 1e-5;
};

/// Values the backward pass needs from a batch-norm forward.
template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> normalized;    // x̂
  std::vector<double> inv_std;  // per channel
  BnMode mode = BnMode::kTrain;
};

namespace detail {

template <typename Scalar>
Eigen::Map<const Vector<Scalar>> plane_of(const Tensor<Scalar>& t, std::size_t offset, std::size_t n) {
  return {t.data() + offset, static_cast<Eigen::Index>(n)};
}
template <typename Scalar>
Eigen::Map<Vector<Scalar>> plane_of(Tensor<Scalar>& t, std::size_t offset, std::size_t n) {
  return {t.data() + offset, static_cast<Eigen::Index>(n)};
}

}  // namespace detail

/// Train mode normalizes with batch statistics (biased variance) and folds
/// them into the running statistics with `stats.momentum`; infer mode uses
/// the running statistics only.
template <typename Scalar>
Tensor<Scalar> batch_norm_forward(const Tensor<Scalar>& x, const Tensor<Scalar>& gamma,
                                  const Tensor<Scalar>& beta, BatchNormStats<Scalar>& stats,
                                  BnMode mode, BatchNormCache<Scalar>* cache = nullptr) {
  const auto d = detail::as_images(x.shape(), "batch_norm");
  detail::require(gamma.size() == d.channels && beta.size() == d.channels,
                  "batch_norm: affine parameters " + shape_string(gamma.shape()) +
                      " do not match input " + shape_string(x.shape()));
  if (stats.mean.size() != d.channels) {
    if (stats.initialized) {
      throw DimensionError("batch_norm: running statistics have " +
                           std::to_string(stats.mean.size()) + " channels, input has " +
                           std::to_string(d.channels));
    }
    stats = BatchNormStats<Scalar>(d.channels);
  }
  if (mode == BnMode::kInfer && !stats.initialized) {
    throw StateError("batch_norm: uninitialized statistics (inference before any training step)");
  }

  const std::size_t plane = d.plane();
  const double count = static_cast<double>(d.batch * plane);
  std::vector<double> mean(d.channels), inv_std(d.channels);
  for (std::size_t c = 0; c < d.channels; ++c) {
    if (mode == BnMode::kTrain) {
      double sum = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) {
        sum += static_cast<double>(detail::plane_of(x, (n * d.channels + c) * plane, plane).sum());
      }
      mean[c] = sum / count;
      double sq = 0.0;
      for (std::size_t n = 0; n < d.batch; ++n) {
        sq += static_cast<double>(
            (detail::plane_of(x, (n * d.channels + c) * plane, plane).array() - static_cast<Scalar>(mean[c]))
                .square()
                .sum());
      }
      const double var = sq / count;
      inv_std[c] = 1.0 / std::sqrt(var + stats.epsilon);
      stats.mean[c] = static_cast<Scalar>(stats.momentum * static_cast<double>(stats.mean[c]) +
                                          (1.0 - stats.momentum) * mean[c]);
      stats.var[c] = static_cast<Scalar>(stats.momentum * static_cast<double>(stats.var[c]) +
                                         (1.0 - stats.momentum) * var);
    } else {
      mean[c] = static_cast<double>(stats.mean[c]);
      inv_std[c] = 1.0 / std::sqrt(static_cast<double>(stats.var[c]) + stats.epsilon);
    }
  }
  if (mode == BnMode::kTrain) stats.initialized = true;

  Tensor<Scalar> y(x.shape());
  Tensor<Scalar> normalized(cache ? x.shape() : Shape{0});
  for (std::size_t n = 0; n < d.batch; ++n) {
    for (std::size_t c = 0; c < d.channels; ++c) {
      const std::size_t off = (n * d.channels + c) * plane;
      const auto xp = detail::plane_of(x, off, plane).array();
      const Scalar m = static_cast<Scalar>(mean[c]);
      const Scalar is = static_cast<Scalar>(inv_std[c]);
      if (cache) {
        auto xh = detail::plane_of(normalized, off, plane).array();
        xh = (xp - m) * is;
        detail::plane_of(y, off, plane).array() = gamma[c] * xh + beta[c];
      } else {
        detail::plane_of(y, off, plane).array() = gamma[c] * ((xp - m) * is) + beta[c];
      }
    }
  }
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = std::move(inv_std);
    cache->mode = mode;
  }
  return y;
}

template <typename Scalar>
void batch_norm_backward(const BatchNormCache<Scalar>& cache, const Tensor<Scalar>& gamma,
                         const Tensor<Scalar>& dy, Tensor<Scalar>* dx, Tensor<Scalar>* dgamma,
                         Tensor<Scalar>* dbeta) {
  const auto d = detail::as_images(dy.shape(), "batch_norm");
  const std::size_t plane = d.plane();
  const double count = static_cast<double>(d.batch * plane);
  const auto& xh = cache.normalized;
  for (std::size_t c = 0; c < d.channels; ++c) {
    double sum_dy = 0.0, sum_dy_xh = 0.0;
    for (std::size_t n = 0; n < d.batch; ++n) {
      const std::size_t off = (n * d.channels + c) * plane;
      const auto g = detail::plane_of(dy, off, plane);
      sum_dy += static_cast<double>(g.sum());
      sum_dy_xh += static_cast<double>(g.dot(detail::plane_of(xh, off, plane)));
    }
    if (dgamma) (*dgamma)[c] += static_cast<Scalar>(sum_dy_xh);
    if (dbeta) (*dbeta)[c] += static_cast<Scalar>(sum_dy);
    if (!dx) continue;
    const Scalar scale = static_cast<Scalar>(static_cast<double>(gamma[c]) * cache.inv_std[c]);
    const Scalar mean_dy = static_cast<Scalar>(sum_dy / count);
    const Scalar mean_dy_xh = static_cast<Scalar>(sum_dy_xh / count);
    for (std::size_t n = 0; n < d.batch; ++n) {
      const std::size_t off = (n * d.channels + c) * plane;
      const auto g = detail::plane_of(dy, off, plane).array();
      auto out = detail::plane_of(*dx, off, plane).array();
      if (cache.mode == BnMode::kTrain) {
        out += scale * (g - mean_dy - detail::plane_of(xh, off, plane).array() * mean_dy_xh);
      } else {
        out += scale * g;
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Loss

/// Mean over all elements of (pred - target)^2.
template <typename Scalar>
double mse_loss(const Tensor<Scalar>& pred, const Tensor<Scalar>& target) {
  detail::require(pred.shape() == target.shape(), "mse: prediction " + shape_string(pred.shape()) +
                                                      " vs target " + shape_string(target.shape()));
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    acc += e * e;
  }
  return pred.empty() ? 0.0 : acc / static_cast<double>(pred.size());
}

template <typename Scalar>
void mse_loss_backward(const Tensor<Scalar>& pred, const Tensor<Scalar>& target, double dloss,
                       Tensor<Scalar>* dpred, Tensor<Scalar>* dtarget) {
  const double k = 2.0 * dloss / static_cast<double>(pred.size());
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double g = k * (static_cast<double>(pred[i]) - static_cast<double>(target[i]));
    if (dpred) (*dpred)[i] += static_cast<Scalar>(g);
    if (dtarget) (*dtarget)[i] -= static_cast<Scalar>(g);
  }
}

}  // namespace csiadv::grad
