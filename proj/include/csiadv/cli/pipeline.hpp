#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "csiadv/cli/config.hpp"
#include "csiadv/eval/sweep.hpp"
#include "csiadv/net/csinet.hpp"

namespace csiadv::cli {

/// A requested output already exists and --force was not given.
class OutputExistsError : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

/// Required inputs of a stage are absent; the message lists all of them.
class MissingInputError : public Error {
 public:
  using Error::Error;
};

enum class Split { kTrain, kVal, kTest, kAttack };
std::string_view split_name(Split s);

/// One trained model of the run.
struct ModelSpec {
  eval::ModelDescriptor descriptor;
  net::ModelConfig config;
  std::string id;  // e.g. "indoor_m512_snr20"
};

std::vector<ModelSpec> model_specs(const RunConfig& cfg);

struct Figure {
  std::string name;   // fig2 ... fig5
  std::string title;
  std::vector<std::string> model_ids;
};

/// Figure analogs that the configured models support.
std::vector<Figure> figures(const RunConfig& cfg);

using Log = std::function<void(const std::string&)>;

class Pipeline {
 public:
  Pipeline(RunConfig cfg, bool force, Log log);

  void gen_data();
  void train();
  void attack();
  void eval();
  void plot();
  /// All stages in order, then manifest.txt.
  void repro();

  std::filesystem::path dataset_path(channel::Scenario s, Split split) const;
  std::filesystem::path model_path(const ModelSpec& m) const;
  std::filesystem::path loss_log_path(const ModelSpec& m) const;
  std::filesystem::path attack_log_path(const ModelSpec& m) const;
  std::filesystem::path perturbation_path(const ModelSpec& m, double isr_db) const;
  std::filesystem::path report_path(const std::string& name) const;
  std::filesystem::path figure_path(const std::string& name) const;
  std::filesystem::path manifest_path() const;

  const RunConfig& config() const { return cfg_; }

 private:
  void claim_outputs(const std::vector<std::filesystem::path>& outputs) const;
  void require_inputs(const std::vector<std::filesystem::path>& inputs) const;

  RunConfig cfg_;
  bool force_;
  Log log_;
};

}  // namespace csiadv::cli
