#pragma once

#include <cstdint>
#include <string>
#include <string_view>

namespace csiadv::channel {

enum class Scenario : std::uint8_t { kIndoor = 0, kOutdoor = 1 };

std::string_view scenario_name(Scenario s);
Scenario parse_scenario(std::string_view name);  // throws ConfigError

/// Parameters of the clustered multipath generator. Delays are in subcarrier
/// sample units, so a path with delay d lands in angular-delay row d.
struct ScenarioConfig {
  Scenario scenario = Scenario::kIndoor;
  std::uint32_t ns = 1024;  // subcarriers
  std::uint32_t nt = 32;    // BS antennas (ULA, half-wavelength spacing)
  std::uint32_t nc = 32;    // retained delay rows
  std::uint32_t clusters = 2;
  std::uint32_t paths_per_cluster = 8;
  double max_delay_fraction = 0.25;  // cluster delays drawn in [0, fraction * Nc)
  double cluster_delay_spread = 1.0;  // intra-cluster delay jitter, samples
  double angular_spread = 0.1;        // std of path angles about the cluster centre, rad
  double angle_sector = 1.4137166941154069;  // cluster centres drawn in [-sector, sector], rad
  std::uint64_t seed = 1;

  static ScenarioConfig indoor();
  static ScenarioConfig outdoor();
  static ScenarioConfig preset(Scenario s);

  void validate() const;  // throws ConfigError naming the offending field

  friend bool operator==(const ScenarioConfig&, const ScenarioConfig&) = default;
};

}  // namespace csiadv::channel
