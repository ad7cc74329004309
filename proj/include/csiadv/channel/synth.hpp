#pragma once

#include <cstdint>
#include <vector>

#include "csiadv/channel/scenario.hpp"
#include "csiadv/channel/transform.hpp"

namespace csiadv::channel {

/// H~, Ns x Nt spatial-frequency response.
using RawChannel = ComplexMatrix<double>;

struct Path {
  std::complex<double> gain;
  double delay = 0.0;  // samples
  double angle = 0.0;  // rad, broadside = 0
};

/// H~[n,t] = sum_l a_l exp(-j2pi n tau_l/Ns) exp(j pi t sin(theta_l)).
RawChannel channel_from_paths(const std::vector<Path>& paths, std::size_t ns, std::size_t nt);

/// Paths of realization `index`; total path power is exactly 1.
std::vector<Path> draw_paths(const ScenarioConfig& cfg, std::uint64_t index);

RawChannel synth_channel(const ScenarioConfig& cfg, std::uint64_t index);

}  // namespace csiadv::channel
