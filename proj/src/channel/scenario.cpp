#include "csiadv/channel/scenario.hpp"

#include <cmath>
#include <numbers>

#include "csiadv/errors.hpp"

namespace csiadv::channel {

std::string_view scenario_name(Scenario s) { return s == Scenario::kIndoor ? "indoor" : "outdoor"; }

Scenario parse_scenario(std::string_view name) {
  if (name == "indoor") return Scenario::kIndoor;
  if (name == "outdoor") return Scenario::kOutdoor;
  throw ConfigError("scenario: expected \"indoor\" or \"outdoor\", got \"" + std::string(name) + "\"");
}

ScenarioConfig ScenarioConfig::indoor() { return ScenarioConfig{}; }

ScenarioConfig ScenarioConfig::outdoor() {
  ScenarioConfig c;
  c.scenario = Scenario::kOutdoor;
  c.clusters = 6;
  c.paths_per_cluster = 8;
  c.max_delay_fraction = 0.8;
  c.cluster_delay_spread = 2.0;
  c.angular_spread = 0.5;
  return c;
}

ScenarioConfig ScenarioConfig::preset(Scenario s) {
  return s == Scenario::kIndoor ? indoor() : outdoor();
}

void ScenarioConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("scenario config: " + what); };
  if (ns == 0 || nt == 0 || nc == 0) fail("ns, nt and nc must be positive");
  if (nc > ns) fail("nc=" + std::to_string(nc) + " exceeds ns=" + std::to_string(ns));
  if (clusters < 1) fail("clusters must be >= 1");
  if (paths_per_cluster < 1) fail("paths_per_cluster must be >= 1");
  if (!(max_delay_fraction > 0.0 && max_delay_fraction <= 1.0)) {
    fail("max_delay_fraction must lie in (0, 1], got " + std::to_string(max_delay_fraction));
  }
  if (!(cluster_delay_spread >= 0.0) || !std::isfinite(cluster_delay_spread)) {
    fail("cluster_delay_spread must be finite and >= 0");
  }
  if (!(angular_spread >= 0.0) || !std::isfinite(angular_spread)) {
    fail("angular_spread must be finite and >= 0");
  }
  if (!(angle_sector >= 0.0 && angle_sector <= std::numbers::pi / 2.0)) {
    fail("angle_sector must lie in [0, pi/2]");
  }
}

}  // namespace csiadv::channel
