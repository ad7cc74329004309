#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "csiadv/attack/attack.hpp"
#include "csiadv/channel/dataset.hpp"
#include "csiadv/net/csinet.hpp"

namespace csiadv::eval {

enum class AttackKind { kNone, kAdversarial, kJamming };

std::string_view attack_name(AttackKind k);
AttackKind parse_attack(std::string_view name);  // throws ConfigError

/// Which trained model a point belongs to.
struct ModelDescriptor {
  double gamma = 0.25;
  channel::Scenario scenario = channel::Scenario::kIndoor;
  std::optional<double> train_snr_db;  // nullopt: noiseless training

  std::string label() const;  // e.g. "indoor g=1/4 snr=20dB"
  friend bool operator==(const ModelDescriptor&, const ModelDescriptor&) = default;
};

struct EvalPoint {
  ModelDescriptor model;
  std::optional<double> isr_db;  // nullopt for the baseline
  AttackKind kind = AttackKind::kNone;
  double nmse_db = 0.0;
  std::size_t n_samples = 0;
  /// Mean injected power per codeword (||p||^2 for adversarial and jamming).
  /// Kept in memory only; not part of the CSV.
  double injected_power = 0.0;
};

/// Baseline first, then per-kind points in ascending ISR.
struct SweepReport {
  std::vector<EvalPoint> points;

  const EvalPoint& baseline(const ModelDescriptor& model) const;
  /// nullopt if absent.
  std::optional<EvalPoint> find(const ModelDescriptor& model, AttackKind kind, double isr_db) const;
  std::vector<ModelDescriptor> models() const;  // first-appearance order

  /// Concatenates reports (e.g. several models into one figure).
  static SweepReport merge(const std::vector<SweepReport>& reports);
};

struct SweepConfig {
  std::vector<double> isr_db;
  std::vector<AttackKind> kinds{AttackKind::kAdversarial, AttackKind::kJamming};
  std::uint64_t seed = 1;
  double center = 0.5;
  std::size_t batch_size = 250;
};

/// Encodes the test set once, scores clean codewords as the baseline, then for
/// each ISR superposes the universal p or per-sample jamming of power ||p||^2.
/// `perturbations` maps ISR dB to the perturbation crafted at that ISR.
SweepReport run_sweep(const net::CsiNetParams<float>& model, const ModelDescriptor& descriptor,
                      const std::map<double, attack::Perturbation>& perturbations,
                      const channel::Dataset& test, const SweepConfig& cfg);

}  // namespace csiadv::eval
