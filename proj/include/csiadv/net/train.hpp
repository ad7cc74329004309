#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "csiadv/channel/dataset.hpp"
#include "csiadv/grad/adam.hpp"
#include "csiadv/net/csinet.hpp"
#include "csiadv/rng.hpp"

namespace csiadv::net {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 200;
  double learning_rate = 1e-3;
  std::uint64_t seed = 1;
  /// Codeword AWGN level during training; nullopt trains noiselessly.
  std::optional<double> snr_db;
  /// Use only the first `max_samples` training samples (nullopt: all).
  std::optional<std::size_t> max_samples;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;        // 1-based
  double train_loss = 0.0;      // mean of per-batch MSE
  std::optional<double> val_loss;  // MSE on the validation set, inference mode
};

struct TrainResult {
  CsiNetParams<float> model;
  std::vector<EpochRecord> history;
};

/// s + n with n ~ N(0, sigma^2 I), sigma^2 = ||s||^2 / (M 10^(snr_db/10)).
Tensor<float> add_awgn(const Tensor<float>& codeword, double snr_db, Rng& rng);

/// Row-wise add_awgn over a B x M codeword batch; returns only the noise.
Tensor<float> awgn_batch_noise(const Tensor<float>& codewords, double snr_db, Rng& rng);

/// Mini-batch Adam on the reconstruction MSE. The validation set, when given,
/// is only monitored.
TrainResult train(const channel::Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const channel::Dataset* validation = nullptr);

/// Reconstruction MSE of a model over a dataset in inference mode.
double reconstruction_mse(const CsiNetParams<float>& model, const channel::Dataset& ds,
                          std::size_t batch_size = 200);

/// Checks that dataset dimensions match the model.
void check_dataset(const channel::Dataset& ds, const ModelConfig& cfg);

}  // namespace csiadv::net
