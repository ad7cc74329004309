#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <vector>

#include "csiadv/channel/scenario.hpp"
#include "csiadv/channel/transform.hpp"
#include "csiadv/grad/tensor.hpp"

namespace csiadv::channel {

/// Truncated angular-delay channel, Nc x Nt.
using TruncatedChannel = ComplexMatrix<double>;

/// normalized = (v - offset) / scale, applied to real and imaginary parts alike.
struct NormalizationRecord {
  float offset = 0.0f;
  float scale = 1.0f;

  float apply(double v) const;
  double invert(float v) const;

  friend bool operator==(const NormalizationRecord&, const NormalizationRecord&) = default;
};

/// Samples as one contiguous count x 2 x Nc x Nt tensor (channel 0 real,
/// channel 1 imaginary).
struct Dataset {
  Scenario scenario = Scenario::kIndoor;
  std::uint32_t ns = 0;
  std::uint32_t nt = 0;
  std::uint32_t nc = 0;
  NormalizationRecord norm;
  grad::Tensor<float> samples;

  std::size_t size() const { return samples.empty() ? 0 : samples.dim(0); }
  std::size_t sample_size() const { return 2 * static_cast<std::size_t>(nc) * nt; }
  std::span<const float> sample(std::size_t i) const;
  grad::Tensor<float> gather(std::span<const std::size_t> indices) const;
  /// Samples [first, first + count).
  grad::Tensor<float> slice(std::size_t first, std::size_t count) const;

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Running min/max over real and imaginary parts, for fitting a
/// normalization over data that is streamed in chunks.
class RangeAccumulator {
 public:
  void add(const TruncatedChannel& h);
  void add(std::span<const TruncatedChannel> channels);
  /// Throws DegenerateDataError when empty, non-finite or of zero range.
  NormalizationRecord record() const;

 private:
  float lo_ = std::numeric_limits<float>::infinity();
  float hi_ = -std::numeric_limits<float>::infinity();
  std::size_t count_ = 0;
  bool nonfinite_ = false;
};

/// Global min/max affine map over real and imaginary parts of all inputs.
NormalizationRecord fit_normalization(std::span<const TruncatedChannel> channels);

/// Applies `norm` to each channel. Values outside the fitted range are not clipped.
Dataset apply_normalization(const ScenarioConfig& cfg, std::span<const TruncatedChannel> channels,
                            const NormalizationRecord& norm);

/// fit_normalization followed by apply_normalization.
Dataset normalize_dataset(const ScenarioConfig& cfg, std::span<const TruncatedChannel> channels);

/// Inverse map of one stored sample back to an Nc x Nt complex matrix.
TruncatedChannel denormalize_sample(const Dataset& ds, std::size_t i);

/// Truncated angular-delay channels for realizations [first, first + count).
std::vector<TruncatedChannel> synth_truncated(const ScenarioConfig& cfg, std::uint64_t first,
                                              std::size_t count);

void write_dataset(const Dataset& ds, const std::filesystem::path& path);
Dataset read_dataset(const std::filesystem::path& path);

inline constexpr std::uint16_t kDatasetVersion = 1;

}  // namespace csiadv::channel
