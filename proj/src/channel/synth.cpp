#include "csiadv/channel/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "csiadv/rng.hpp"

namespace csiadv::channel {

namespace {
constexpr std::uint64_t kPathStreamTag = 0x70617468;  // "path"
}

RawChannel channel_from_paths(const std::vector<Path>& paths, std::size_t ns, std::size_t nt) {
  RawChannel h = RawChannel::Zero(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(nt));
  Eigen::VectorXcd freq(static_cast<Eigen::Index>(ns));
  Eigen::RowVectorXcd steer(static_cast<Eigen::Index>(nt));
  for (const Path& p : paths) {
    for (std::size_t n = 0; n < ns; ++n) {
      freq(static_cast<Eigen::Index>(n)) =
          std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(n) * p.delay / static_cast<double>(ns));
    }
    const double s = std::sin(p.angle);
    for (std::size_t t = 0; t < nt; ++t) {
      steer(static_cast<Eigen::Index>(t)) = std::polar(1.0, std::numbers::pi * static_cast<double>(t) * s);
    }
    h.noalias() += (p.gain * freq) * steer;
  }
  return h;
}

std::vector<Path> draw_paths(const ScenarioConfig& cfg, std::uint64_t index) {
  cfg.validate();
  Rng rng = derive_stream(cfg.seed, index, kPathStreamTag);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  const double window = cfg.max_delay_fraction * static_cast<double>(cfg.nc);
  const double half_pi = std::numbers::pi / 2.0;
  std::vector<Path> paths;
  paths.reserve(static_cast<std::size_t>(cfg.clusters) * cfg.paths_per_cluster);
  for (std::uint32_t k = 0; k < cfg.clusters; ++k) {
    const double centre_delay = unit(rng) * window;
    const double centre_angle = (unit(rng) * 2.0 - 1.0) * cfg.angle_sector;
    const double cluster_power = 0.2 + 0.8 * unit(rng);
    for (std::uint32_t l = 0; l < cfg.paths_per_cluster; ++l) {
      Path p;
      // jitter stays inside the delay window: no path wraps past row Nc
      const double jitter = cfg.cluster_delay_spread * unit(rng);
      p.delay = std::min(centre_delay + jitter, std::nextafter(window, 0.0));
      p.angle = std::clamp(centre_angle + cfg.angular_spread * normal(rng), -half_pi, half_pi);
      const double amp = std::sqrt(cluster_power / 2.0);
      const double re = normal(rng);
      const double im = normal(rng);
      p.gain = {amp * re, amp * im};
      paths.push_back(p);
    }
  }
  double total = 0.0;
  for (const Path& p : paths) total += std::norm(p.gain);
  const double g = total > 0.0 ? 1.0 / std::sqrt(total) : 0.0;
  for (Path& p : paths) p.gain *= g;
  return paths;
}

RawChannel synth_channel(const ScenarioConfig& cfg, std::uint64_t index) {
  return channel_from_paths(draw_paths(cfg, index), cfg.ns, cfg.nt);
}

}  // namespace csiadv::channel
