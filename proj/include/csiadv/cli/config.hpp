#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "csiadv/channel/scenario.hpp"

namespace csiadv::cli {

inline constexpr int kSchemaVersion = 1;

struct ScenarioPlan {
  channel::ScenarioConfig generator;
  std::vector<double> gammas;        // noiseless models, one per rate
  std::vector<double> train_snr_db;  // AWGN-hardened models at hardened_gamma
  double hardened_gamma = 0.25;
};

struct SampleCounts {
  std::size_t train = 5000;
  std::size_t val = 1000;
  std::size_t test = 2000;
  std::size_t attack = 1500;
};

struct Step1 {
  std::size_t epochs = 50;
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
};

struct Step2 {
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
  bool rescale = false;  // ablation: craft once at the highest ISR and rescale
};

struct Seeds {
  std::uint64_t data = 1;
  std::uint64_t train = 2;
  std::uint64_t attack = 3;
  std::uint64_t eval = 4;
};

struct Paths {
  std::filesystem::path root = "run";
  std::filesystem::path data = "data";
  std::filesystem::path models = "models";
  std::filesystem::path perturbations = "perturbations";
  std::filesystem::path logs = "logs";
  std::filesystem::path reports = "reports";
  std::filesystem::path figures = "figures";

  std::filesystem::path under(const std::filesystem::path& p) const { return root / p; }
};

struct RunConfig {
  std::string preset = "desk";
  std::vector<ScenarioPlan> scenarios;
  SampleCounts samples;
  Step1 step1;
  Step2 step2;
  std::vector<double> isr_db;
  double nmse_center = 0.5;
  Seeds seeds;
  Paths paths;

  static RunConfig desk();
  static RunConfig paper();
  static RunConfig preset_named(const std::string& name);  // throws ConfigError

  const ScenarioPlan* find(channel::Scenario s) const;
  void validate() const;  // throws ConfigError naming the offending key
  void override_seed(std::uint64_t seed);
};

/// JSON text with a top-level "schema_version". Unknown keys are rejected and
/// named in the error. Keys left out keep the defaults of `base`.
RunConfig parse_config(const std::string& json_text, const RunConfig& base);
RunConfig load_config(const std::filesystem::path& path, const RunConfig& base);
std::string dump_config(const RunConfig& cfg);

}  // namespace csiadv::cli
