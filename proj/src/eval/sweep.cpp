#include "csiadv/eval/sweep.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <sstream>

#include "csiadv/eval/nmse.hpp"
#include "csiadv/net/train.hpp"

namespace csiadv::eval {

namespace {

constexpr std::uint64_t kJammingTag = 0x6a616d00;  // "jam"

std::string fraction(double gamma) {
  const double inv = 1.0 / gamma;
  if (std::abs(inv - std::round(inv)) < 1e-9) return "1/" + std::to_string(std::lround(inv));
  std::ostringstream out;
  out << gamma;
  return out.str();
}

grad::Tensor<float> decode_all(const net::CsiNetParams<float>& model,
                               const grad::Tensor<float>& codewords, std::size_t batch) {
  const std::size_t n = codewords.dim(0);
  const std::size_t m = codewords.dim(1);
  const std::size_t per = model.config.input_size();
  grad::Tensor<float> out(grad::Shape{n, 2, model.config.nc, model.config.nt});
  for (std::size_t first = 0; first < n; first += batch) {
    const std::size_t k = std::min(batch, n - first);
    const float* src = codewords.data() + first * m;
    grad::Tensor<float> chunk(grad::Shape{k, m});
    std::copy(src, src + k * m, chunk.data());
    const auto y = net::decode_batch(model, chunk);
    std::copy(y.data(), y.data() + k * per, out.data() + first * per);
  }
  return out;
}

grad::Tensor<float> encode_all(const net::CsiNetParams<float>& model, const channel::Dataset& ds,
                               std::size_t batch) {
  const std::size_t m = model.config.codeword;
  grad::Tensor<float> out(grad::Shape{ds.size(), m});
  for (std::size_t first = 0; first < ds.size(); first += batch) {
    const std::size_t k = std::min(batch, ds.size() - first);
    const auto s = net::encode_batch(model, ds.slice(first, k));
    std::copy(s.data(), s.data() + k * m, out.data() + first * m);
  }
  return out;
}

}  // namespace

std::string_view attack_name(AttackKind k) {
  switch (k) {
    case AttackKind::kNone: return "none";
    case AttackKind::kAdversarial: return "adversarial";
    case AttackKind::kJamming: return "jamming";
  }
  return "none";
}

AttackKind parse_attack(std::string_view name) {
  if (name == "none") return AttackKind::kNone;
  if (name == "adversarial") return AttackKind::kAdversarial;
  if (name == "jamming") return AttackKind::kJamming;
  throw ConfigError("attack kind: expected none, adversarial or jamming, got \"" +
                    std::string(name) + "\"");
}

std::string ModelDescriptor::label() const {
  std::string out = std::string(channel::scenario_name(scenario)) + " g=" + fraction(gamma);
  if (train_snr_db) {
    std::ostringstream snr;
    snr << *train_snr_db;
    out += " snr=" + snr.str() + "dB";
  }
  return out;
}

const EvalPoint& SweepReport::baseline(const ModelDescriptor& model) const {
  for (const auto& p : points) {
    if (p.model == model && !p.isr_db) return p;
  }
  throw ContractError("report has no baseline for " + model.label());
}

std::optional<EvalPoint> SweepReport::find(const ModelDescriptor& model, AttackKind kind,
                                           double isr_db) const {
  for (const auto& p : points) {
    if (p.model == model && p.kind == kind && p.isr_db && *p.isr_db == isr_db) return p;
  }
  return std::nullopt;
}

std::vector<ModelDescriptor> SweepReport::models() const {
  std::vector<ModelDescriptor> out;
  for (const auto& p : points) {
    if (std::find(out.begin(), out.end(), p.model) == out.end()) out.push_back(p.model);
  }
  return out;
}

SweepReport SweepReport::merge(const std::vector<SweepReport>& reports) {
  SweepReport out;
  for (const auto& r : reports) out.points.insert(out.points.end(), r.points.begin(), r.points.end());
  return out;
}

SweepReport run_sweep(const net::CsiNetParams<float>& model, const ModelDescriptor& descriptor,
                      const std::map<double, attack::Perturbation>& perturbations,
                      const channel::Dataset& test, const SweepConfig& cfg) {
  net::check_dataset(test, model.config);
  if (test.size() == 0) throw DegenerateDataError("run_sweep: empty test set");
  if (cfg.batch_size == 0) throw ConfigError("run_sweep: batch_size must be >= 1");
  std::vector<double> isrs = cfg.isr_db;
  std::sort(isrs.begin(), isrs.end());
  isrs.erase(std::unique(isrs.begin(), isrs.end()), isrs.end());

  const bool needs_p = std::any_of(cfg.kinds.begin(), cfg.kinds.end(),
                                   [](AttackKind k) { return k != AttackKind::kNone; });
  if (needs_p) {
    std::string missing;
    for (double isr : isrs) {
      if (!perturbations.contains(isr)) missing += (missing.empty() ? "" : ", ") + std::to_string(isr);
    }
    if (!missing.empty()) throw ContractError("run_sweep: missing perturbation for ISR dB " + missing);
  }

  const std::size_t m = model.config.codeword;
  const auto x = test.slice(0, test.size());
  const auto codewords = encode_all(model, test, cfg.batch_size);

  SweepReport report;
  const NmseResult base = nmse(x, decode_all(model, codewords, cfg.batch_size), cfg.center);
  report.points.push_back(
      EvalPoint{descriptor, std::nullopt, AttackKind::kNone, base.db, base.used, 0.0});

  for (AttackKind kind : cfg.kinds) {
    for (double isr : isrs) {
      EvalPoint point{descriptor, isr, kind, base.db, base.used, 0.0};
      if (kind == AttackKind::kAdversarial) {
        const auto& p = perturbations.at(isr);
        if (p.size() != m) {
          throw DimensionError("run_sweep: perturbation length " + std::to_string(p.size()) +
                               " vs codeword length " + std::to_string(m));
        }
        const NmseResult r = nmse(
            x, decode_all(model, attack::apply_perturbation(codewords, p.values), cfg.batch_size),
            cfg.center);
        point.nmse_db = r.db;
        point.n_samples = r.used;
        point.injected_power = p.power();
      } else if (kind == AttackKind::kJamming) {
        const double power = perturbations.at(isr).power();
        auto jammed = codewords;
        double injected = 0.0;
        const std::uint64_t tag = kJammingTag ^ std::bit_cast<std::uint64_t>(isr);
        for (std::size_t i = 0; i < test.size(); ++i) {
          Rng rng = derive_stream(cfg.seed, i, tag);
          const auto noise = attack::jamming_noise(m, power, rng);
          float* row = jammed.data() + i * m;
          double norm2 = 0.0;
          for (std::size_t j = 0; j < m; ++j) {
            row[j] += noise[j];
            norm2 += static_cast<double>(noise[j]) * noise[j];
          }
          injected += norm2;
        }
        const NmseResult r = nmse(x, decode_all(model, jammed, cfg.batch_size), cfg.center);
        point.nmse_db = r.db;
        point.n_samples = r.used;
        point.injected_power = injected / static_cast<double>(test.size());
      }
      report.points.push_back(point);
    }
  }
  return report;
}

}  // namespace csiadv::eval
