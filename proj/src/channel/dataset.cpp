#include "csiadv/channel/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "csiadv/binary_io.hpp"
#include "csiadv/channel/synth.hpp"
#include "csiadv/errors.hpp"

namespace csiadv::channel {

namespace {

constexpr std::string_view kMagic = "CSID";

// Stored samples are float; fitting on the float-rounded parts makes the
// minimum map to exactly 0.
float part(double v) { return static_cast<float>(v); }

void check_extents(const TruncatedChannel& h, Eigen::Index rows, Eigen::Index cols) {
  if (h.rows() != rows || h.cols() != cols) {
    throw DimensionError("dataset: channel is " + std::to_string(h.rows()) + "x" +
                         std::to_string(h.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

}  // namespace

float NormalizationRecord::apply(double v) const {
  return static_cast<float>((static_cast<double>(part(v)) - offset) / scale);
}

double NormalizationRecord::invert(float v) const {
  return static_cast<double>(v) * scale + offset;
}

std::span<const float> Dataset::sample(std::size_t i) const {
  if (i >= size()) {
    throw DimensionError("dataset: sample " + std::to_string(i) + " out of range (" +
                         std::to_string(size()) + " samples)");
  }
  return samples.values().subspan(i * sample_size(), sample_size());
}

grad::Tensor<float> Dataset::gather(std::span<const std::size_t> indices) const {
  grad::Tensor<float> out(grad::Shape{indices.size(), 2, nc, nt});
  float* dst = out.data();
  for (std::size_t i : indices) {
    const auto s = sample(i);
    dst = std::copy(s.begin(), s.end(), dst);
  }
  return out;
}

grad::Tensor<float> Dataset::slice(std::size_t first, std::size_t count) const {
  if (first + count > size()) {
    throw DimensionError("dataset: slice [" + std::to_string(first) + ", " +
                         std::to_string(first + count) + ") exceeds " + std::to_string(size()) +
                         " samples");
  }
  const float* src = samples.data() + first * sample_size();
  grad::Tensor<float> out(grad::Shape{count, 2, nc, nt});
  std::copy(src, src + count * sample_size(), out.data());
  return out;
}

void RangeAccumulator::add(const TruncatedChannel& h) {
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    for (double v : {h.data()[i].real(), h.data()[i].imag()}) {
      const float f = part(v);
      if (!std::isfinite(f)) {
        nonfinite_ = true;
        continue;
      }
      lo_ = std::min(lo_, f);
      hi_ = std::max(hi_, f);
    }
  }
  ++count_;
}

void RangeAccumulator::add(std::span<const TruncatedChannel> channels) {
  for (const auto& h : channels) add(h);
}

NormalizationRecord RangeAccumulator::record() const {
  if (count_ == 0) throw DegenerateDataError("normalize_dataset: no samples");
  if (nonfinite_) throw DegenerateDataError("normalize_dataset: non-finite channel values");
  const double range = static_cast<double>(hi_) - static_cast<double>(lo_);
  float scale = static_cast<float>(range);
  // round up so the maximum never lands above 1
  if (static_cast<double>(scale) < range) scale = std::nextafter(scale, std::numeric_limits<float>::infinity());
  if (!(scale > 0.0f)) {
    throw DegenerateDataError("normalize_dataset: all values equal, zero dynamic range");
  }
  return NormalizationRecord{lo_, scale};
}

NormalizationRecord fit_normalization(std::span<const TruncatedChannel> channels) {
  RangeAccumulator acc;
  acc.add(channels);
  return acc.record();
}

Dataset apply_normalization(const ScenarioConfig& cfg, std::span<const TruncatedChannel> channels,
                            const NormalizationRecord& norm) {
  if (!(norm.scale > 0.0f)) throw DegenerateDataError("normalization scale must be positive");
  Dataset ds;
  ds.scenario = cfg.scenario;
  ds.ns = cfg.ns;
  ds.nt = cfg.nt;
  ds.nc = cfg.nc;
  ds.norm = norm;
  ds.samples = grad::Tensor<float>(grad::Shape{channels.size(), 2, cfg.nc, cfg.nt});
  const std::size_t plane = static_cast<std::size_t>(cfg.nc) * cfg.nt;
  for (std::size_t k = 0; k < channels.size(); ++k) {
    const auto& h = channels[k];
    check_extents(h, cfg.nc, cfg.nt);
    float* re = ds.samples.data() + k * 2 * plane;
    float* im = re + plane;
    for (Eigen::Index r = 0; r < h.rows(); ++r) {
      for (Eigen::Index c = 0; c < h.cols(); ++c) {
        const std::size_t at = static_cast<std::size_t>(r) * cfg.nt + static_cast<std::size_t>(c);
        re[at] = norm.apply(h(r, c).real());
        im[at] = norm.apply(h(r, c).imag());
      }
    }
  }
  return ds;
}

Dataset normalize_dataset(const ScenarioConfig& cfg, std::span<const TruncatedChannel> channels) {
  return apply_normalization(cfg, channels, fit_normalization(channels));
}

TruncatedChannel denormalize_sample(const Dataset& ds, std::size_t i) {
  const auto s = ds.sample(i);
  const std::size_t plane = static_cast<std::size_t>(ds.nc) * ds.nt;
  TruncatedChannel h(ds.nc, ds.nt);
  for (std::size_t r = 0; r < ds.nc; ++r) {
    for (std::size_t c = 0; c < ds.nt; ++c) {
      const std::size_t at = r * ds.nt + c;
      h(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = {ds.norm.invert(s[at]),
                                                                      ds.norm.invert(s[plane + at])};
    }
  }
  return h;
}

std::vector<TruncatedChannel> synth_truncated(const ScenarioConfig& cfg, std::uint64_t first,
                                              std::size_t count) {
  cfg.validate();
  const DftPlan<double> plan(cfg.ns, cfg.nt);
  std::vector<TruncatedChannel> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back(to_truncated_angular_delay(synth_channel(cfg, first + k), plan, cfg.nc));
  }
  return out;
}

void write_dataset(const Dataset& ds, const std::filesystem::path& path) {
  if (ds.samples.size() != ds.size() * ds.sample_size()) {
    throw DimensionError("write_dataset: sample tensor " + grad::shape_string(ds.samples.shape()) +
                         " does not match Nc=" + std::to_string(ds.nc) + ", Nt=" +
                         std::to_string(ds.nt));
  }
  io::ByteWriter w;
  w.magic(kMagic);
  w.u16(kDatasetVersion);
  w.u8(static_cast<std::uint8_t>(ds.scenario));
  w.u32(ds.ns);
  w.u32(ds.nt);
  w.u32(ds.nc);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.f32(ds.norm.offset);
  w.f32(ds.norm.scale);
  w.f32s(ds.samples.values());
  w.save(path);
}

Dataset read_dataset(const std::filesystem::path& path) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16();
  if (version != kDatasetVersion) {
    throw FormatError(FormatErrorKind::kVersionMismatch,
                      path.string() + ": dataset version " + std::to_string(version) +
                          ", expected " + std::to_string(kDatasetVersion));
  }
  Dataset ds;
  const std::uint8_t tag = r.u8();
  if (tag > 1) {
    throw FormatError(FormatErrorKind::kShapeMismatch,
                      path.string() + ": unknown scenario tag " + std::to_string(tag));
  }
  ds.scenario = static_cast<Scenario>(tag);
  ds.ns = r.u32();
  ds.nt = r.u32();
  ds.nc = r.u32();
  const std::uint32_t count = r.u32();
  ds.norm.offset = r.f32();
  ds.norm.scale = r.f32();
  const std::size_t payload = static_cast<std::size_t>(count) * ds.sample_size();
  if (r.remaining() < 4 * payload) {
    throw FormatError(FormatErrorKind::kTruncated,
                      path.string() + ": truncated file, " + std::to_string(r.remaining()) +
                          " payload bytes for " + std::to_string(count) + " samples");
  }
  ds.samples = grad::Tensor<float>(grad::Shape{count, 2, ds.nc, ds.nt});
  r.f32s(ds.samples.values());
  return ds;
}

}  // namespace csiadv::channel
