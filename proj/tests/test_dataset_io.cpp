#include <doctest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "csiadv/binary_io.hpp"
#include "csiadv/channel/dataset.hpp"
#include "temp_dir.hpp"

using namespace csiadv::channel;
using csiadv::DegenerateDataError;
using csiadv::DimensionError;
using csiadv::FormatError;
using csiadv::FormatErrorKind;

namespace {

ScenarioConfig small_config() {
  ScenarioConfig cfg;
  cfg.ns = 16;
  cfg.nt = 4;
  cfg.nc = 4;
  return cfg;
}

TruncatedChannel filled(Eigen::Index rows, Eigen::Index cols, std::complex<double> v) {
  return TruncatedChannel::Constant(rows, cols, v);
}

std::vector<TruncatedChannel> random_channels(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> d(0.0, 1.0);
  std::vector<TruncatedChannel> out;
  for (std::size_t k = 0; k < count; ++k) {
    TruncatedChannel h(4, 4);
    for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = {d(rng), d(rng)};
    out.push_back(h);
  }
  return out;
}

FormatErrorKind read_error_kind(const std::filesystem::path& path) {
  try {
    read_dataset(path);
  } catch (const FormatError& e) {
    return e.kind();
  }
  FAIL("read_dataset did not throw");
  return FormatErrorKind::kIo;
}

}  // namespace

TEST_CASE("parts spanning exactly [0,1] are unchanged") {
  TruncatedChannel h(4, 4);
  for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = {double(i) / 15.0, 1.0 - double(i) / 15.0};
  const std::vector<TruncatedChannel> one{h};
  const auto ds = normalize_dataset(small_config(), one);
  CHECK(ds.norm.offset == 0.0f);
  CHECK(ds.norm.scale == 1.0f);
  const auto s = ds.sample(0);
  for (Eigen::Index r = 0; r < 4; ++r)
    for (Eigen::Index c = 0; c < 4; ++c) {
      CHECK(s[r * 4 + c] == static_cast<float>(h(r, c).real()));
      CHECK(s[16 + r * 4 + c] == static_cast<float>(h(r, c).imag()));
    }
}

TEST_CASE("symmetric range puts zero at the midpoint") {
  TruncatedChannel h = filled(4, 4, {0.0, 0.0});
  h(0, 0) = {-2.0, 0.0};
  h(1, 1) = {2.0, 0.0};
  const std::vector<TruncatedChannel> one{h};
  const auto ds = normalize_dataset(small_config(), one);
  CHECK(ds.sample(0)[2] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(ds.sample(0)[16] == doctest::Approx(0.5).epsilon(1e-7));
  CHECK(ds.sample(0)[0] == 0.0f);
  CHECK(ds.sample(0)[5] == 1.0f);
}

TEST_CASE("normalized values lie in [0,1] and the extremes are hit") {
  const auto chans = random_channels(50, 3);
  const auto ds = normalize_dataset(small_config(), chans);
  float lo = 1.0f, hi = 0.0f;
  for (float v : ds.samples.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  CHECK(lo == 0.0f);
  CHECK(hi <= 1.0f);
  CHECK(hi > 1.0f - 1e-6f);
}

TEST_CASE("denormalize inverts normalize") {
  const auto chans = random_channels(20, 4);
  const auto ds = normalize_dataset(small_config(), chans);
  for (std::size_t k = 0; k < chans.size(); ++k) {
    const auto back = denormalize_sample(ds, k);
    // float storage bounds the round trip; compare against the sample scale
    const double err = (back - chans[k]).cwiseAbs().maxCoeff();
    CHECK(err <= 1e-6 * ds.norm.scale * 4);
  }
}

TEST_CASE("streamed range matches a one-shot fit") {
  const auto chans = random_channels(30, 5);
  RangeAccumulator acc;
  acc.add(std::span(chans).subspan(0, 7));
  for (std::size_t k = 7; k < chans.size(); ++k) acc.add(chans[k]);
  CHECK(acc.record() == fit_normalization(chans));
}

TEST_CASE("degenerate inputs are rejected") {
  const std::vector<TruncatedChannel> none;
  CHECK_THROWS_AS(fit_normalization(none), DegenerateDataError);
  const std::vector<TruncatedChannel> flat{filled(4, 4, {0.3, 0.3}), filled(4, 4, {0.3, 0.3})};
  CHECK_THROWS_WITH_AS(fit_normalization(flat), doctest::Contains("zero dynamic range"),
                       DegenerateDataError);
  auto bad = random_channels(1, 6);
  bad[0](2, 2) = {std::nan(""), 0.0};
  CHECK_THROWS_WITH_AS(fit_normalization(bad), doctest::Contains("non-finite"), DegenerateDataError);
  CHECK_THROWS_AS(apply_normalization(small_config(), random_channels(1, 7), NormalizationRecord{0.0f, 0.0f}),
                  DegenerateDataError);
}

TEST_CASE("channel extents must match the scenario") {
  const std::vector<TruncatedChannel> wrong{TruncatedChannel::Ones(3, 4)};
  CHECK_THROWS_AS(apply_normalization(small_config(), wrong, NormalizationRecord{}), DimensionError);
}

TEST_CASE("slice, gather and sample bounds") {
  const auto ds = normalize_dataset(small_config(), random_channels(5, 8));
  const auto sl = ds.slice(1, 2);
  CHECK(sl.shape() == csiadv::grad::Shape{2, 2, 4, 4});
  const std::vector<std::size_t> idx{3, 1};
  const auto g = ds.gather(idx);
  for (std::size_t j = 0; j < ds.sample_size(); ++j) {
    CHECK(g[j] == ds.sample(3)[j]);
    CHECK(g[ds.sample_size() + j] == sl[j]);
  }
  CHECK_THROWS_AS(ds.sample(5), DimensionError);
  CHECK_THROWS_AS(ds.slice(4, 2), DimensionError);
}

TEST_CASE("write then read is bit-exact") {
  TempDir dir;
  auto ds = normalize_dataset(small_config(), random_channels(9, 9));
  ds.scenario = Scenario::kOutdoor;
  write_dataset(ds, dir / "d.csid");
  CHECK(read_dataset(dir / "d.csid") == ds);

  const Dataset empty = apply_normalization(small_config(), {}, NormalizationRecord{});
  write_dataset(empty, dir / "e.csid");
  CHECK(read_dataset(dir / "e.csid").size() == 0);
}

TEST_CASE("corrupt files raise distinct errors") {
  TempDir dir;
  const auto ds = normalize_dataset(small_config(), random_channels(3, 10));
  const auto path = dir / "d.csid";
  write_dataset(ds, path);
  const auto bytes = csiadv::io::read_file(path);

  auto rewrite = [&](std::vector<char> b) {
    csiadv::io::write_file(path, b);
    return read_error_kind(path);
  };

  auto magic = bytes;
  magic[0] = 'X';
  CHECK(rewrite(magic) == FormatErrorKind::kBadMagic);

  auto version = bytes;
  version[4] = 9;
  CHECK(rewrite(version) == FormatErrorKind::kVersionMismatch);

  auto tag = bytes;
  tag[6] = 7;
  CHECK(rewrite(tag) == FormatErrorKind::kShapeMismatch);

  // cut in the middle of the second sample
  CHECK(rewrite(std::vector<char>(bytes.begin(), bytes.end() - 4 * 40)) == FormatErrorKind::kTruncated);
  CHECK(rewrite(std::vector<char>(bytes.begin(), bytes.begin() + 10)) == FormatErrorKind::kTruncated);
  CHECK(rewrite({}) == FormatErrorKind::kTruncated);

  CHECK(read_error_kind(dir / "missing.csid") == FormatErrorKind::kIo);
}
