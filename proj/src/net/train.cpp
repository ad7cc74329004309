#include "csiadv/net/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "csiadv/grad/tape.hpp"

namespace csiadv::net {

namespace {
constexpr std::uint64_t kShuffleTag = 0x73687566;  // "shuf"
constexpr std::uint64_t kNoiseTag = 0x6e6f6973;    // "nois"

double awgn_sigma(std::span<const float> s, double snr_db) {
  double power = 0.0;
  for (float v : s) power += static_cast<double>(v) * v;
  if (!(power > 0.0)) throw ContractError("add_awgn: zero-power codeword");
  return std::sqrt(power / (static_cast<double>(s.size()) * std::pow(10.0, snr_db / 10.0)));
}
}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be positive");
  if (snr_db && !std::isfinite(*snr_db)) throw ConfigError("train: snr_db must be finite");
}

Tensor<float> add_awgn(const Tensor<float>& codeword, double snr_db, Rng& rng) {
  if (codeword.rank() != 1) {
    throw DimensionError("add_awgn: expected a codeword vector, got " +
                         grad::shape_string(codeword.shape()));
  }
  const double sigma = awgn_sigma(codeword.values(), snr_db);
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<float> out = codeword;
  for (float& v : out.values()) v = static_cast<float>(v + sigma * normal(rng));
  return out;
}

Tensor<float> awgn_batch_noise(const Tensor<float>& codewords, double snr_db, Rng& rng) {
  const auto [batch, m] = grad::detail::as_rows(codewords.shape(), "add_awgn");
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<float> noise(codewords.shape());
  for (std::size_t b = 0; b < batch; ++b) {
    const double sigma = awgn_sigma(codewords.values().subspan(b * m, m), snr_db);
    for (std::size_t j = 0; j < m; ++j) noise[b * m + j] = static_cast<float>(sigma * normal(rng));
  }
  return noise;
}

void check_dataset(const channel::Dataset& ds, const ModelConfig& cfg) {
  if (ds.nc != cfg.nc || ds.nt != cfg.nt) {
    throw DimensionError("dataset is " + std::to_string(ds.nc) + "x" + std::to_string(ds.nt) +
                         ", model expects " + std::to_string(cfg.nc) + "x" +
                         std::to_string(cfg.nt));
  }
}

double reconstruction_mse(const CsiNetParams<float>& model, const channel::Dataset& ds,
                          std::size_t batch_size) {
  check_dataset(ds, model.config);
  if (ds.size() == 0) throw DegenerateDataError("reconstruction_mse: empty dataset");
  double total = 0.0;
  for (std::size_t first = 0; first < ds.size(); first += batch_size) {
    const std::size_t n = std::min(batch_size, ds.size() - first);
    const auto x = ds.slice(first, n);
    total += grad::mse_loss(decode_batch(model, encode_batch(model, x)), x) * static_cast<double>(n);
  }
  return total / static_cast<double>(ds.size());
}

TrainResult train(const channel::Dataset& ds, const ModelConfig& mcfg, const TrainConfig& tcfg,
                  const channel::Dataset* validation) {
  tcfg.validate();
  check_dataset(ds, mcfg);
  if (validation) check_dataset(*validation, mcfg);
  const std::size_t count = std::min(ds.size(), tcfg.max_samples.value_or(ds.size()));
  if (count == 0) throw DegenerateDataError("train: empty dataset");

  TrainResult result{build_model<float>(mcfg, tcfg.seed), {}};
  CsiNetParams<float>& model = result.model;
  grad::Adam<float> opt(model.parameters(), grad::AdamConfig{tcfg.learning_rate});

  std::vector<std::size_t> order(count);
  for (std::size_t epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = derive_stream(tcfg.seed, epoch, kShuffleTag);
    std::shuffle(order.begin(), order.end(), shuffle);
    Rng noise_rng = derive_stream(tcfg.seed, epoch, kNoiseTag);

    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < count; first += tcfg.batch_size) {
      const std::size_t n = std::min(tcfg.batch_size, count - first);
      grad::Tape<float> tape;
      grad::Var x = tape.constant(ds.gather(std::span(order).subspan(first, n)));
      grad::Var s = encoder_graph(tape, model, x, BnMode::kTrain);
      if (tcfg.snr_db) {
        s = tape.add(s, tape.constant(awgn_batch_noise(tape.value(s), *tcfg.snr_db, noise_rng)));
      }
      grad::Var loss = tape.mse(decoder_graph(tape, model, s, BnMode::kTrain), x);
      opt.zero_grad();
      tape.backward(loss);
      opt.step();
      loss_sum += static_cast<double>(tape.value(loss)[0]);
      ++batches;
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches), std::nullopt};
    if (validation && validation->size() > 0) rec.val_loss = reconstruction_mse(model, *validation);
    result.history.push_back(rec);
  }
  return result;
}

}  // namespace csiadv::net
