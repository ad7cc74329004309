#include "csiadv/attack/attack.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include "csiadv/binary_io.hpp"
#include "csiadv/grad/adam.hpp"
#include "csiadv/grad/tape.hpp"
#include "csiadv/net/train.hpp"

namespace csiadv::attack {

namespace {

constexpr std::string_view kMagic = "CSIP";
constexpr std::uint64_t kShuffleTag = 0x61747368;  // "atsh"

double squared_norm(std::span<const float> v) {
  double acc = 0.0;
  for (float x : v) acc += static_cast<double>(x) * x;
  return acc;
}

}  // namespace

void AttackConfig::validate() const {
  if (!std::isfinite(isr_db)) throw ConfigError("attack: isr_db must be finite");
  if (batch_size < 1) throw ConfigError("attack: batch_size must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("attack: learning_rate must be positive");
}

double Perturbation::power() const { return squared_norm(values.values()); }

double Perturbation::isr_relative_error() const {
  const double target = db_to_linear(isr_db) * static_cast<double>(reference_power);
  return power() / target - 1.0;
}

double mean_codeword_power(const Tensor<float>& codewords) {
  const auto [batch, m] = grad::detail::as_rows(codewords.shape(), "codeword power");
  if (batch == 0) throw DegenerateDataError("codeword power: no codewords");
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) total += squared_norm(codewords.values().subspan(b * m, m));
  return total / static_cast<double>(batch);
}

Tensor<float> project_isr(const Tensor<float>& p, double reference_power, double isr_linear) {
  if (!(reference_power > 0.0)) {
    throw ContractError("project_isr: reference codeword power must be positive, got " +
                        std::to_string(reference_power));
  }
  if (!(isr_linear > 0.0)) throw ContractError("project_isr: ISR must be positive");
  const double norm2 = squared_norm(p.values());
  if (norm2 == 0.0) return p;
  const double factor = std::sqrt(isr_linear * reference_power / norm2);
  Tensor<float> out(p.shape());
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<float>(p[i] * factor);
  return out;
}

Tensor<float> apply_perturbation(const Tensor<float>& s, const Tensor<float>& p) {
  const auto [batch, m] = grad::detail::as_rows(s.shape(), "apply_perturbation");
  if (p.rank() != 1 || p.size() != m) {
    throw DimensionError("apply_perturbation: perturbation " + grad::shape_string(p.shape()) +
                         " vs codewords " + grad::shape_string(s.shape()));
  }
  Tensor<float> out = s;
  out.matrix(batch, m).rowwise() += p.vec().transpose();
  return out;
}

Tensor<float> jamming_noise(std::size_t m, double power, Rng& rng) {
  if (m == 0) throw DimensionError("jamming_noise: zero length");
  if (!(power > 0.0)) throw ContractError("jamming_noise: power must be positive");
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> draw(m);
  double norm2 = 0.0;
  for (double& v : draw) {
    v = normal(rng);
    norm2 += v * v;
  }
  const double factor = std::sqrt(power / norm2);
  Tensor<float> out(grad::Shape{m});
  for (std::size_t i = 0; i < m; ++i) out[i] = static_cast<float>(draw[i] * factor);
  return out;
}

CraftResult craft_perturbation(const net::CsiNetParams<float>& model, const channel::Dataset& ds,
                               const AttackConfig& cfg) {
  cfg.validate();
  if (!model.frozen()) {
    throw ContractError("craft_perturbation: victim model must be frozen before crafting");
  }
  net::check_dataset(ds, model.config);
  const std::size_t count = std::min(ds.size(), cfg.max_samples.value_or(ds.size()));
  if (count == 0) throw DegenerateDataError("craft_perturbation: empty dataset");

  const std::size_t m = model.config.codeword;
  const Tensor<float> inputs = ds.slice(0, count);
  const Tensor<float> codewords = net::encode_batch(model, inputs);
  // P_s is stored as f32; project against the stored value so the file
  // satisfies the ISR invariant exactly as written.
  const float reference = static_cast<float>(mean_codeword_power(codewords));
  const double isr = db_to_linear(cfg.isr_db);

  net::CsiNetParams<float> victim = model;  // the tape needs mutable handles
  grad::Param<float> bias("attack.bias", Tensor<float>(grad::Shape{m}));
  grad::Adam<float> opt({&bias}, grad::AdamConfig{cfg.learning_rate});

  CraftResult result;
  std::vector<std::size_t> order(count);
  const std::size_t plane = ds.sample_size();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle = derive_stream(cfg.seed, epoch, kShuffleTag);
    std::shuffle(order.begin(), order.end(), shuffle);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t first = 0; first < count; first += cfg.batch_size) {
      const std::size_t n = std::min(cfg.batch_size, count - first);
      Tensor<float> x(grad::Shape{n, 2, ds.nc, ds.nt});
      Tensor<float> s(grad::Shape{n, m});
      for (std::size_t k = 0; k < n; ++k) {
        const std::size_t i = order[first + k];
        std::copy_n(inputs.data() + i * plane, plane, x.data() + k * plane);
        std::copy_n(codewords.data() + i * m, m, s.data() + k * m);
      }
      grad::Tape<float> tape;
      grad::Var target = tape.constant(std::move(x));
      grad::Var tampered = tape.add_rows(tape.constant(std::move(s)), tape.param(bias));
      grad::Var loss =
          tape.mse(net::decoder_graph(tape, victim, tampered, grad::BnMode::kInfer), target);
      opt.zero_grad();
      tape.backward(tape.scale(loss, -1.0f));  // ascent
      opt.step();
      bias.value = project_isr(bias.value, reference, isr);
      loss_sum += static_cast<double>(tape.value(loss)[0]);
      ++batches;
    }
    result.epoch_loss.push_back(loss_sum / static_cast<double>(batches));
  }
  result.perturbation = Perturbation{bias.value, cfg.isr_db, reference};
  return result;
}

Perturbation rescale_perturbation(const Perturbation& p, double isr_db) {
  return Perturbation{project_isr(p.values, p.reference_power, db_to_linear(isr_db)), isr_db,
                      p.reference_power};
}

void save_perturbation(const Perturbation& p, const std::filesystem::path& path) {
  io::ByteWriter w;
  w.magic(kMagic);
  w.u16(kPerturbationVersion);
  w.u32(static_cast<std::uint32_t>(p.size()));
  w.f32(static_cast<float>(p.isr_db));
  w.f32(p.reference_power);
  w.f32s(p.values.values());
  w.save(path);
}

Perturbation load_perturbation(const std::filesystem::path& path,
                               std::optional<std::size_t> expected_m) {
  auto r = io::ByteReader::from_file(path);
  r.expect_magic(kMagic);
  const std::uint16_t version = r.u16();
  if (version != kPerturbationVersion) {
    throw FormatError(FormatErrorKind::kVersionMismatch,
                      path.string() + ": perturbation version " + std::to_string(version) +
                          ", expected " + std::to_string(kPerturbationVersion));
  }
  const std::uint32_t m = r.u32();
  if (expected_m && *expected_m != m) {
    throw FormatError(FormatErrorKind::kShapeMismatch,
                      path.string() + ": perturbation length " + std::to_string(m) +
                          ", expected " + std::to_string(*expected_m));
  }
  Perturbation p;
  p.isr_db = r.f32();
  p.reference_power = r.f32();
  p.values = Tensor<float>(grad::Shape{m});
  r.f32s(p.values.values());
  return p;
}

}  // namespace csiadv::attack
