#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "csiadv/channel/dataset.hpp"
#include "csiadv/net/csinet.hpp"
#include "csiadv/rng.hpp"

namespace csiadv::attack {

using grad::Tensor;

inline double db_to_linear(double db) { return std::pow(10.0, db / 10.0); }

struct AttackConfig {
  double isr_db = -10.0;
  std::size_t epochs = 10;
  double learning_rate = 1e-3;
  std::size_t batch_size = 200;
  std::uint64_t seed = 1;
  /// Use only the first `max_samples` attack samples (nullopt: all).
  std::optional<std::size_t> max_samples;

  void validate() const;
};

/// Universal codeword offset p with ||p||^2 = 10^(isr_db/10) * reference_power.
struct Perturbation {
  Tensor<float> values;       // length M
  double isr_db = 0.0;
  float reference_power = 0;  // mean ||s||^2 over the crafting set

  std::size_t size() const { return values.size(); }
  double power() const;  // ||p||^2, accumulated in double
  /// ||p||^2 / (isr_linear * reference_power) - 1.
  double isr_relative_error() const;

  friend bool operator==(const Perturbation&, const Perturbation&) = default;
};

struct CraftResult {
  Perturbation perturbation;
  std::vector<double> epoch_loss;  // mean reconstruction MSE under p, per epoch
};

/// Mean ||s||^2 over a batch of codewords (B x M).
double mean_codeword_power(const Tensor<float>& codewords);

/// p scaled onto the sphere ||p'||^2 = isr_linear * reference_power. A zero p
/// is returned unchanged.
Tensor<float> project_isr(const Tensor<float>& p, double reference_power, double isr_linear);

/// s + p for a single codeword or every row of a B x M batch.
Tensor<float> apply_perturbation(const Tensor<float>& s, const Tensor<float>& p);

/// i.i.d. Gaussian vector rescaled to ||n||^2 == power.
Tensor<float> jamming_noise(std::size_t m, double power, Rng& rng);

/// Projected gradient ascent on the mean reconstruction MSE, updating only
/// the bias p (initialised to zero) with Adam. `model` must be frozen.
CraftResult craft_perturbation(const net::CsiNetParams<float>& model, const channel::Dataset& ds,
                               const AttackConfig& cfg);

/// Ablation: reuse a crafted direction at another ISR.
Perturbation rescale_perturbation(const Perturbation& p, double isr_db);

inline constexpr std::uint16_t kPerturbationVersion = 1;

void save_perturbation(const Perturbation& p, const std::filesystem::path& path);
/// With `expected_m`, a length mismatch is a shape-mismatch format error.
Perturbation load_perturbation(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_m = std::nullopt);

}  // namespace csiadv::attack
