#pragma once

// CsiNet encoder/decoder. The parameter struct and graph builders are
// templated on the scalar type: float for training and attack, double for
// gradient verification.
//
// Encoder: conv3x3(2->2) + BN + LeakyReLU -> flatten -> FC(2*Nc*Nt -> M)
// Decoder: FC(M -> 2*Nc*Nt) -> reshape -> RefineNet x2 -> conv3x3(2->2) + sigmoid
// RefineNet: x + BN(conv(16->2)) o LReLU o BN(conv(8->16)) o LReLU o BN(conv(2->8)) (x)

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "csiadv/errors.hpp"
#include "csiadv/grad/tape.hpp"
#include "csiadv/rng.hpp"

namespace csiadv::net {

using grad::BatchNormStats;
using grad::BnMode;
using grad::Param;
using grad::Shape;
using grad::Tensor;

inline constexpr double kLeakySlope = 0.3;

struct ModelConfig {
  std::size_t nc = 32;
  std::size_t nt = 32;
  std::size_t codeword = 512;  // M

  /// N = 2 * Nc * Nt real values per CSI sample.
  std::size_t input_size() const { return 2 * nc * nt; }
  double compression_rate() const {
    return static_cast<double>(codeword) / static_cast<double>(input_size());
  }

  /// M = gamma * 2 * Nc * Nt; gamma must produce a whole codeword length.
  static ModelConfig from_rate(double gamma, std::size_t nc = 32, std::size_t nt = 32) {
    const double m = gamma * static_cast<double>(2 * nc * nt);
    const double rounded = std::round(m);
    if (!(gamma > 0.0) || std::abs(m - rounded) > 1e-9 || rounded < 1.0) {
      throw ConfigError("compression rate " + std::to_string(gamma) +
                        " does not give an integral codeword length for Nc=" + std::to_string(nc) +
                        ", Nt=" + std::to_string(nt));
    }
    ModelConfig cfg{nc, nt, static_cast<std::size_t>(rounded)};
    cfg.validate();
    return cfg;
  }

  void validate() const {
    if (nc == 0 || nt == 0 || codeword == 0) throw ConfigError("model dimensions must be positive");
    if (codeword >= input_size()) {
      throw ConfigError("codeword length M=" + std::to_string(codeword) +
                        " must be smaller than 2*Nc*Nt=" + std::to_string(input_size()) +
                        " (no compression)");
    }
  }

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// 3x3 convolution followed (optionally) by batch normalization.
template <typename Scalar>
struct ConvBlock {
  Param<Scalar> weights;
  Param<Scalar> bias;
  Param<Scalar> gamma;
  Param<Scalar> beta;
  BatchNormStats<Scalar> stats;
};

template <typename Scalar>
struct RefineUnit {
  std::array<ConvBlock<Scalar>, 3> blocks;
};

template <typename Scalar>
struct CsiNetParams {
  ModelConfig config;
  ConvBlock<Scalar> encoder_conv;
  Param<Scalar> encoder_fc_weights;
  Param<Scalar> encoder_fc_bias;
  Param<Scalar> decoder_fc_weights;
  Param<Scalar> decoder_fc_bias;
  std::array<RefineUnit<Scalar>, 2> refine;
  Param<Scalar> output_weights;
  Param<Scalar> output_bias;

  /// Every parameter in canonical order (the order used by the model file).
  std::vector<Param<Scalar>*> parameters() {
    std::vector<Param<Scalar>*> out;
    auto block = [&](ConvBlock<Scalar>& b) {
      out.insert(out.end(), {&b.weights, &b.bias, &b.gamma, &b.beta});
    };
    block(encoder_conv);
    out.insert(out.end(), {&encoder_fc_weights, &encoder_fc_bias, &decoder_fc_weights,
                           &decoder_fc_bias});
    for (auto& unit : refine)
      for (auto& b : unit.blocks) block(b);
    out.insert(out.end(), {&output_weights, &output_bias});
    return out;
  }

  std::vector<const Param<Scalar>*> parameters() const {
    auto ptrs = const_cast<CsiNetParams*>(this)->parameters();
    return {ptrs.begin(), ptrs.end()};
  }

  std::vector<BatchNormStats<Scalar>*> batch_norms() {
    std::vector<BatchNormStats<Scalar>*> out{&encoder_conv.stats};
    for (auto& unit : refine)
      for (auto& b : unit.blocks) out.push_back(&b.stats);
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto* p : parameters()) n += p->value.size();
    return n;
  }

  void set_trainable(bool trainable) {
    for (auto* p : parameters()) p->trainable = trainable;
  }
  void freeze() { set_trainable(false); }
  bool frozen() const {
    for (const auto* p : parameters())
      if (p->trainable) return false;
    return true;
  }

  template <typename Other>
  CsiNetParams<Other> cast() const;
};

namespace detail {

template <typename Scalar>
Param<Scalar> uniform_param(std::string name, Shape shape, std::size_t fan_in, Rng& rng) {
  Tensor<Scalar> t(std::move(shape));
  const double limit = std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> dist(-limit, limit);
  for (auto& v : t.values()) v = static_cast<Scalar>(dist(rng));
  return Param<Scalar>(std::move(name), std::move(t));
}

template <typename Scalar>
Param<Scalar> const_param(std::string name, std::size_t n, Scalar v) {
  return Param<Scalar>(std::move(name), Tensor<Scalar>(Shape{n}, v));
}

template <typename Scalar>
ConvBlock<Scalar> make_block(const std::string& name, std::size_t in, std::size_t out, Rng& rng) {
  ConvBlock<Scalar> b;
  b.weights = uniform_param<Scalar>(name + ".weights", Shape{out, in, 3, 3}, in * 9, rng);
  b.bias = const_param<Scalar>(name + ".bias", out, Scalar(0));
  b.gamma = const_param<Scalar>(name + ".bn_gamma", out, Scalar(1));
  b.beta = const_param<Scalar>(name + ".bn_beta", out, Scalar(0));
  b.stats = BatchNormStats<Scalar>::identity(out);
  return b;
}

template <typename To, typename From>
Param<To> cast_param(const Param<From>& p) {
  return Param<To>(p.name, p.value.template cast<To>(), p.trainable);
}

template <typename To, typename From>
ConvBlock<To> cast_block(const ConvBlock<From>& b) {
  ConvBlock<To> out{cast_param<To>(b.weights), cast_param<To>(b.bias), cast_param<To>(b.gamma),
                    cast_param<To>(b.beta), BatchNormStats<To>{}};
  out.stats.mean = b.stats.mean.template cast<To>();
  out.stats.var = b.stats.var.template cast<To>();
  out.stats.initialized = b.stats.initialized;
  out.stats.momentum = b.stats.momentum;
  out.stats.epsilon = b.stats.epsilon;
  return out;
}

}  // namespace detail

template <typename Scalar>
template <typename Other>
CsiNetParams<Other> CsiNetParams<Scalar>::cast() const {
  CsiNetParams<Other> out;
  out.config = config;
  out.encoder_conv = detail::cast_block<Other>(encoder_conv);
  out.encoder_fc_weights = detail::cast_param<Other>(encoder_fc_weights);
  out.encoder_fc_bias = detail::cast_param<Other>(encoder_fc_bias);
  out.decoder_fc_weights = detail::cast_param<Other>(decoder_fc_weights);
  out.decoder_fc_bias = detail::cast_param<Other>(decoder_fc_bias);
  for (std::size_t u = 0; u < refine.size(); ++u)
    for (std::size_t b = 0; b < 3; ++b)
      out.refine[u].blocks[b] = detail::cast_block<Other>(refine[u].blocks[b]);
  out.output_weights = detail::cast_param<Other>(output_weights);
  out.output_bias = detail::cast_param<Other>(output_bias);
  return out;
}

/// Fresh CsiNet with fan-in-scaled uniform weights and zero biases.
template <typename Scalar>
CsiNetParams<Scalar> build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng = derive_stream(seed, 0, 0x6373696e6574ULL);
  const std::size_t n = cfg.input_size();
  CsiNetParams<Scalar> m;
  m.config = cfg;
  m.encoder_conv = detail::make_block<Scalar>("encoder.conv", 2, 2, rng);
  m.encoder_fc_weights = detail::uniform_param<Scalar>("encoder.fc.weights", Shape{cfg.codeword, n}, n, rng);
  m.encoder_fc_bias = detail::const_param<Scalar>("encoder.fc.bias", cfg.codeword, Scalar(0));
  m.decoder_fc_weights =
      detail::uniform_param<Scalar>("decoder.fc.weights", Shape{n, cfg.codeword}, cfg.codeword, rng);
  m.decoder_fc_bias = detail::const_param<Scalar>("decoder.fc.bias", n, Scalar(0));
  constexpr std::array<std::size_t, 4> widths{2, 8, 16, 2};
  for (std::size_t u = 0; u < m.refine.size(); ++u) {
    for (std::size_t b = 0; b < 3; ++b) {
      m.refine[u].blocks[b] = detail::make_block<Scalar>(
          "decoder.refine" + std::to_string(u) + ".conv" + std::to_string(b), widths[b],
          widths[b + 1], rng);
    }
  }
  m.output_weights = detail::uniform_param<Scalar>("decoder.out.weights", Shape{2, 2, 3, 3}, 18, rng);
  m.output_bias = detail::const_param<Scalar>("decoder.out.bias", 2, Scalar(0));
  return m;
}

// ---------------------------------------------------------------------------
// Tape graph builders (training and attack crafting)

template <typename Scalar>
grad::Var conv_bn_graph(grad::Tape<Scalar>& t, ConvBlock<Scalar>& b, grad::Var x, BnMode mode) {
  grad::Var y = t.conv2d(x, t.param(b.weights), t.param(b.bias));
  return t.batch_norm(y, t.param(b.gamma), t.param(b.beta), b.stats, mode);
}

/// x: B×2×Nc×Nt -> B×M codewords.
template <typename Scalar>
grad::Var encoder_graph(grad::Tape<Scalar>& t, CsiNetParams<Scalar>& m, grad::Var x, BnMode mode) {
  const Shape shape = t.value(x).shape();  // copy: later pushes may move the node
  const ModelConfig& c = m.config;
  if (shape.size() != 4 || shape[1] != 2 || shape[2] != c.nc || shape[3] != c.nt) {
    throw DimensionError("encoder: expected B×2×" + std::to_string(c.nc) + "×" +
                         std::to_string(c.nt) + " input, got " + grad::shape_string(shape));
  }
  const std::size_t batch = shape[0];
  grad::Var h = t.leaky_relu(conv_bn_graph(t, m.encoder_conv, x, mode), Scalar(kLeakySlope));
  h = t.reshape(h, Shape{batch, c.input_size()});
  return t.dense(h, t.param(m.encoder_fc_weights), t.param(m.encoder_fc_bias));
}

template <typename Scalar>
grad::Var refine_graph(grad::Tape<Scalar>& t, RefineUnit<Scalar>& u, grad::Var x, BnMode mode) {
  grad::Var h = t.leaky_relu(conv_bn_graph(t, u.blocks[0], x, mode), Scalar(kLeakySlope));
  h = t.leaky_relu(conv_bn_graph(t, u.blocks[1], h, mode), Scalar(kLeakySlope));
  h = conv_bn_graph(t, u.blocks[2], h, mode);
  return t.add(x, h);
}

/// s: B×M codewords -> B×2×Nc×Nt reconstruction in (0,1).
template <typename Scalar>
grad::Var decoder_graph(grad::Tape<Scalar>& t, CsiNetParams<Scalar>& m, grad::Var s, BnMode mode) {
  const Shape shape = t.value(s).shape();  // copy: later pushes may move the node
  const ModelConfig& c = m.config;
  if (shape.size() != 2 || shape[1] != c.codeword) {
    throw DimensionError("decoder: expected B×" + std::to_string(c.codeword) +
                         " codewords, got " + grad::shape_string(shape));
  }
  grad::Var h = t.dense(s, t.param(m.decoder_fc_weights), t.param(m.decoder_fc_bias));
  h = t.reshape(h, Shape{shape[0], 2, c.nc, c.nt});
  for (auto& unit : m.refine) h = refine_graph(t, unit, h, mode);
  h = t.conv2d(h, t.param(m.output_weights), t.param(m.output_bias));
  return t.sigmoid(h);
}

// ---------------------------------------------------------------------------
// Pure inference (running statistics, no tape)

namespace detail {

template <typename Scalar>
Tensor<Scalar> conv_bn_infer(const ConvBlock<Scalar>& b, const Tensor<Scalar>& x) {
  BatchNormStats<Scalar> stats = b.stats;  // inference never mutates the model
  return grad::batch_norm_forward(grad::conv2d_forward(x, b.weights.value, b.bias.value),
                                  b.gamma.value, b.beta.value, stats, BnMode::kInfer);
}

}  // namespace detail

/// Batched encoder: B×2×Nc×Nt -> B×M.
template <typename Scalar>
Tensor<Scalar> encode_batch(const CsiNetParams<Scalar>& m, const Tensor<Scalar>& x) {
  const ModelConfig& c = m.config;
  const auto& s = x.shape();
  if (s.size() != 4 || s[1] != 2 || s[2] != c.nc || s[3] != c.nt) {
    throw DimensionError("encode: expected B×2×" + std::to_string(c.nc) + "×" +
                         std::to_string(c.nt) + " input, got " + grad::shape_string(s));
  }
  auto h = grad::leaky_relu(detail::conv_bn_infer(m.encoder_conv, x), Scalar(kLeakySlope));
  h = h.reshaped(Shape{s[0], c.input_size()});
  return grad::dense_forward(h, m.encoder_fc_weights.value, m.encoder_fc_bias.value);
}

/// Batched decoder: B×M -> B×2×Nc×Nt.
template <typename Scalar>
Tensor<Scalar> decode_batch(const CsiNetParams<Scalar>& m, const Tensor<Scalar>& s) {
  const ModelConfig& c = m.config;
  if (s.rank() != 2 || s.dim(1) != c.codeword) {
    throw DimensionError("decode: expected B×" + std::to_string(c.codeword) +
                         " codewords, got " + grad::shape_string(s.shape()));
  }
  auto h = grad::dense_forward(s, m.decoder_fc_weights.value, m.decoder_fc_bias.value);
  h = h.reshaped(Shape{s.dim(0), 2, c.nc, c.nt});
  for (const auto& unit : m.refine) {
    auto r = grad::leaky_relu(detail::conv_bn_infer(unit.blocks[0], h), Scalar(kLeakySlope));
    r = grad::leaky_relu(detail::conv_bn_infer(unit.blocks[1], r), Scalar(kLeakySlope));
    r = detail::conv_bn_infer(unit.blocks[2], r);
    h.vec() += r.vec();
  }
  return grad::sigmoid(grad::conv2d_forward(h, m.output_weights.value, m.output_bias.value));
}

/// Single sample 2×Nc×Nt -> codeword of length M.
template <typename Scalar>
Tensor<Scalar> encode(const CsiNetParams<Scalar>& m, const Tensor<Scalar>& sample) {
  if (sample.rank() != 3) {
    throw DimensionError("encode: expected a 2×Nc×Nt sample, got " +
                         grad::shape_string(sample.shape()));
  }
  Shape batched{1, sample.dim(0), sample.dim(1), sample.dim(2)};
  return encode_batch(m, sample.reshaped(batched)).reshaped(Shape{m.config.codeword});
}

/// Single codeword of length M -> 2×Nc×Nt reconstruction.
template <typename Scalar>
Tensor<Scalar> decode(const CsiNetParams<Scalar>& m, const Tensor<Scalar>& codeword) {
  if (codeword.rank() != 1 || codeword.size() != m.config.codeword) {
    throw DimensionError("decode: expected codeword of length " +
                         std::to_string(m.config.codeword) + ", got " +
                         grad::shape_string(codeword.shape()));
  }
  return decode_batch(m, codeword.reshaped(Shape{1, codeword.size()}))
      .reshaped(Shape{2, m.config.nc, m.config.nt});
}

}  // namespace csiadv::net
