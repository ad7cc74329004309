#include "csiadv/cli/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "csiadv/attack/attack.hpp"
#include "csiadv/binary_io.hpp"
#include "csiadv/channel/dataset.hpp"
#include "csiadv/cli/manifest.hpp"
#include "csiadv/eval/report.hpp"
#include "csiadv/net/model_io.hpp"
#include "csiadv/net/train.hpp"

namespace csiadv::cli {

namespace fs = std::filesystem;
using eval::format_number;

namespace {

constexpr std::array<Split, 4> kSplits{Split::kTrain, Split::kVal, Split::kTest, Split::kAttack};

std::size_t split_count(const SampleCounts& c, Split s) {
  switch (s) {
    case Split::kTrain: return c.train;
    case Split::kVal: return c.val;
    case Split::kTest: return c.test;
    case Split::kAttack: return c.attack;
  }
  return 0;
}

void write_text(const fs::path& path, const std::string& text) {
  io::write_file(path, std::span<const char>(text.data(), text.size()));
}

}  // namespace

std::string_view split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    case Split::kTest: return "test";
    case Split::kAttack: return "attack";
  }
  return "train";
}

std::vector<ModelSpec> model_specs(const RunConfig& cfg) {
  std::vector<ModelSpec> out;
  for (const auto& plan : cfg.scenarios) {
    const auto& g = plan.generator;
    const std::string scen(channel::scenario_name(g.scenario));
    auto add = [&](double gamma, std::optional<double> snr) {
      ModelSpec m;
      m.descriptor = eval::ModelDescriptor{gamma, g.scenario, snr};
      m.config = net::ModelConfig::from_rate(gamma, g.nc, g.nt);
      m.id = scen + "_m" + std::to_string(m.config.codeword) +
             (snr ? "_snr" + format_number(*snr) : std::string("_clean"));
      out.push_back(m);
    };
    for (double gamma : plan.gammas) add(gamma, std::nullopt);
    for (double snr : plan.train_snr_db) add(plan.hardened_gamma, snr);
  }
  return out;
}

std::vector<Figure> figures(const RunConfig& cfg) {
  const auto specs = model_specs(cfg);
  auto ids = [&](auto pred) {
    std::vector<std::string> out;
    for (const auto& m : specs)
      if (pred(m.descriptor)) out.push_back(m.id);
    return out;
  };
  std::vector<Figure> out;
  if (const ScenarioPlan* in = cfg.find(channel::Scenario::kIndoor)) {
    const double g0 = in->gammas.front();
    out.push_back({"fig2", "Indoor, noiseless training, adversarial vs jamming",
                   ids([&](const eval::ModelDescriptor& d) {
                     return d.scenario == channel::Scenario::kIndoor && d.gamma == g0 && !d.train_snr_db;
                   })});
    auto hardened = ids([](const eval::ModelDescriptor& d) {
      return d.scenario == channel::Scenario::kIndoor && d.train_snr_db.has_value();
    });
    if (!hardened.empty()) out.push_back({"fig3", "Indoor, AWGN-trained models", hardened});
    auto sweep = ids([](const eval::ModelDescriptor& d) {
      return d.scenario == channel::Scenario::kIndoor && !d.train_snr_db;
    });
    if (sweep.size() > 1) out.push_back({"fig4", "Indoor, compression-rate sweep", sweep});
  }
  if (const ScenarioPlan* od = cfg.find(channel::Scenario::kOutdoor)) {
    const double g0 = od->gammas.front();
    out.push_back({"fig5", "Outdoor, noiseless training, adversarial vs jamming",
                   ids([&](const eval::ModelDescriptor& d) {
                     return d.scenario == channel::Scenario::kOutdoor && d.gamma == g0 && !d.train_snr_db;
                   })});
  }
  return out;
}

Pipeline::Pipeline(RunConfig cfg, bool force, Log log)
    : cfg_(std::move(cfg)), force_(force), log_(std::move(log)) {
  cfg_.validate();
  if (!log_) log_ = [](const std::string&) {};
}

fs::path Pipeline::dataset_path(channel::Scenario s, Split split) const {
  return cfg_.paths.under(cfg_.paths.data) /
         (std::string(channel::scenario_name(s)) + "_" + std::string(split_name(split)) + ".csid");
}
fs::path Pipeline::model_path(const ModelSpec& m) const {
  return cfg_.paths.under(cfg_.paths.models) / (m.id + ".csim");
}
fs::path Pipeline::loss_log_path(const ModelSpec& m) const {
  return cfg_.paths.under(cfg_.paths.logs) / (m.id + "_loss.csv");
}
fs::path Pipeline::attack_log_path(const ModelSpec& m) const {
  return cfg_.paths.under(cfg_.paths.logs) / (m.id + "_attack.csv");
}
fs::path Pipeline::perturbation_path(const ModelSpec& m, double isr_db) const {
  return cfg_.paths.under(cfg_.paths.perturbations) / (m.id + "_isr" + format_number(isr_db) + ".csip");
}
fs::path Pipeline::report_path(const std::string& name) const {
  return cfg_.paths.under(cfg_.paths.reports) / (name + ".csv");
}
fs::path Pipeline::figure_path(const std::string& name) const {
  return cfg_.paths.under(cfg_.paths.figures) / (name + ".svg");
}
fs::path Pipeline::manifest_path() const { return cfg_.paths.root / "manifest.txt"; }

void Pipeline::claim_outputs(const std::vector<fs::path>& outputs) const {
  if (!force_) {
    std::string existing;
    for (const auto& p : outputs) {
      if (fs::exists(p)) existing += "\n  " + p.string();
    }
    if (!existing.empty()) {
      throw OutputExistsError("outputs already exist (use --force to overwrite):" + existing);
    }
  }
  for (const auto& p : outputs) fs::create_directories(p.parent_path());
}

void Pipeline::require_inputs(const std::vector<fs::path>& inputs) const {
  std::string missing;
  for (const auto& p : inputs) {
    if (!fs::exists(p)) missing += "\n  " + p.string();
  }
  if (!missing.empty()) throw MissingInputError("missing inputs:" + missing);
}

void Pipeline::gen_data() {
  std::vector<fs::path> outputs;
  for (const auto& plan : cfg_.scenarios)
    for (Split s : kSplits) outputs.push_back(dataset_path(plan.generator.scenario, s));
  claim_outputs(outputs);

  for (const auto& plan : cfg_.scenarios) {
    const auto& g = plan.generator;
    // Splits take consecutive, disjoint realization ranges. The normalization
    // is fitted over all of them so every split lies in [0, 1].
    std::map<Split, std::uint64_t> first;
    std::uint64_t next = 0;
    for (Split s : kSplits) {
      first[s] = next;
      next += split_count(cfg_.samples, s);
    }
    channel::RangeAccumulator range;
    constexpr std::size_t kChunk = 1000;
    for (std::uint64_t i = 0; i < next; i += kChunk) {
      range.add(channel::synth_truncated(g, i, std::min<std::uint64_t>(kChunk, next - i)));
    }
    const auto norm = range.record();
    for (Split s : kSplits) {
      const auto channels = channel::synth_truncated(g, first[s], split_count(cfg_.samples, s));
      const auto ds = channel::apply_normalization(g, channels, norm);
      channel::write_dataset(ds, dataset_path(g.scenario, s));
      log_("gen-data " + dataset_path(g.scenario, s).filename().string() + ": " +
           std::to_string(ds.size()) + " samples");
    }
  }
}

void Pipeline::train() {
  const auto specs = model_specs(cfg_);
  std::vector<fs::path> inputs, outputs;
  for (const auto& plan : cfg_.scenarios) {
    inputs.push_back(dataset_path(plan.generator.scenario, Split::kTrain));
    inputs.push_back(dataset_path(plan.generator.scenario, Split::kVal));
  }
  for (const auto& m : specs) {
    outputs.push_back(model_path(m));
    outputs.push_back(loss_log_path(m));
  }
  require_inputs(inputs);
  claim_outputs(outputs);

  for (const auto& plan : cfg_.scenarios) {
    const auto s = plan.generator.scenario;
    const auto train_ds = channel::read_dataset(dataset_path(s, Split::kTrain));
    const auto val_ds = channel::read_dataset(dataset_path(s, Split::kVal));
    for (const auto& m : specs) {
      if (m.descriptor.scenario != s) continue;
      net::TrainConfig tc;
      tc.epochs = cfg_.step1.epochs;
      tc.batch_size = cfg_.step1.batch_size;
      tc.learning_rate = cfg_.step1.learning_rate;
      tc.seed = cfg_.seeds.train;
      tc.snr_db = m.descriptor.train_snr_db;
      log_("train " + m.id + ": " + std::to_string(tc.epochs) + " epochs on " +
           std::to_string(train_ds.size()) + " samples");
      const auto result =
          net::train(train_ds, m.config, tc, val_ds.size() > 0 ? &val_ds : nullptr);
      net::save_model(result.model, model_path(m));
      std::string csv = "epoch,train_loss,val_loss\n";
      for (const auto& r : result.history) {
        csv += std::to_string(r.epoch) + "," + format_number(r.train_loss) + "," +
               (r.val_loss ? format_number(*r.val_loss) : "") + "\n";
      }
      write_text(loss_log_path(m), csv);
      const auto& last = result.history.back();
      log_("train " + m.id + ": final train loss " + format_number(last.train_loss) +
           (last.val_loss ? ", val loss " + format_number(*last.val_loss) : ""));
    }
  }
}

void Pipeline::attack() {
  const auto specs = model_specs(cfg_);
  std::vector<fs::path> inputs, outputs;
  for (const auto& plan : cfg_.scenarios) inputs.push_back(dataset_path(plan.generator.scenario, Split::kAttack));
  for (const auto& m : specs) {
    inputs.push_back(model_path(m));
    outputs.push_back(attack_log_path(m));
    for (double isr : cfg_.isr_db) outputs.push_back(perturbation_path(m, isr));
  }
  require_inputs(inputs);
  claim_outputs(outputs);

  for (const auto& plan : cfg_.scenarios) {
    const auto s = plan.generator.scenario;
    const auto attack_ds = channel::read_dataset(dataset_path(s, Split::kAttack));
    for (const auto& m : specs) {
      if (m.descriptor.scenario != s) continue;
      auto model = net::load_model(model_path(m), m.config);
      model.freeze();
      std::string csv = "isr_db,epoch,loss\n";
      auto craft = [&](double isr) {
        attack::AttackConfig ac;
        ac.isr_db = isr;
        ac.epochs = cfg_.step2.epochs;
        ac.learning_rate = cfg_.step2.learning_rate;
        ac.batch_size = cfg_.step2.batch_size;
        ac.seed = cfg_.seeds.attack;
        auto r = attack::craft_perturbation(model, attack_ds, ac);
        for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) {
          csv += format_number(isr) + "," + std::to_string(e + 1) + "," +
                 format_number(r.epoch_loss[e]) + "\n";
        }
        log_("attack " + m.id + " ISR " + format_number(isr) + " dB: final loss " +
             (r.epoch_loss.empty() ? std::string("n/a") : format_number(r.epoch_loss.back())));
        return r.perturbation;
      };
      if (cfg_.step2.rescale) {
        const double top = cfg_.isr_db.back();
        const auto p = craft(top);
        for (double isr : cfg_.isr_db) {
          attack::save_perturbation(attack::rescale_perturbation(p, isr), perturbation_path(m, isr));
        }
      } else {
        for (double isr : cfg_.isr_db) attack::save_perturbation(craft(isr), perturbation_path(m, isr));
      }
      write_text(attack_log_path(m), csv);
    }
  }
}

void Pipeline::eval() {
  const auto specs = model_specs(cfg_);
  const auto figs = figures(cfg_);
  std::vector<fs::path> inputs, outputs;
  for (const auto& plan : cfg_.scenarios) inputs.push_back(dataset_path(plan.generator.scenario, Split::kTest));
  for (const auto& m : specs) {
    inputs.push_back(model_path(m));
    for (double isr : cfg_.isr_db) inputs.push_back(perturbation_path(m, isr));
    outputs.push_back(report_path(m.id));
  }
  for (const auto& f : figs) outputs.push_back(report_path(f.name));
  require_inputs(inputs);
  claim_outputs(outputs);

  std::map<std::string, eval::SweepReport> reports;
  for (const auto& plan : cfg_.scenarios) {
    const auto s = plan.generator.scenario;
    const auto test_ds = channel::read_dataset(dataset_path(s, Split::kTest));
    for (const auto& m : specs) {
      if (m.descriptor.scenario != s) continue;
      const auto model = net::load_model(model_path(m), m.config);
      std::map<double, attack::Perturbation> ps;
      for (double isr : cfg_.isr_db) {
        ps.emplace(isr, attack::load_perturbation(perturbation_path(m, isr), m.config.codeword));
      }
      eval::SweepConfig sc;
      sc.isr_db = cfg_.isr_db;
      sc.seed = cfg_.seeds.eval;
      sc.center = cfg_.nmse_center;
      auto report = eval::run_sweep(model, m.descriptor, ps, test_ds, sc);
      eval::write_csv(report, report_path(m.id));
      log_("eval " + m.id + ": baseline " + format_number(report.baseline(m.descriptor).nmse_db) + " dB");
      reports.emplace(m.id, std::move(report));
    }
  }
  for (const auto& f : figs) {
    std::vector<eval::SweepReport> parts;
    for (const auto& id : f.model_ids) parts.push_back(reports.at(id));
    eval::write_csv(eval::SweepReport::merge(parts), report_path(f.name));
  }
}

void Pipeline::plot() {
  const auto figs = figures(cfg_);
  std::vector<fs::path> inputs, outputs;
  for (const auto& f : figs) {
    inputs.push_back(report_path(f.name));
    outputs.push_back(figure_path(f.name));
  }
  require_inputs(inputs);
  claim_outputs(outputs);
  for (const auto& f : figs) {
    eval::render_plot(eval::read_csv(report_path(f.name)), figure_path(f.name), {f.title});
    log_("plot " + figure_path(f.name).filename().string());
  }
}

void Pipeline::repro() {
  claim_outputs({manifest_path()});
  // The snapshot lives inside the run directory, so its root is ".". Two runs
  // that differ only in --out then hash identically.
  RunConfig snapshot = cfg_;
  snapshot.paths.root = ".";
  write_text(cfg_.paths.root / "config.json", dump_config(snapshot));
  gen_data();
  train();
  attack();
  eval();
  plot();
  write_text(manifest_path(), format_manifest(build_manifest(cfg_.paths.root)));
  log_("repro: manifest written to " + manifest_path().string());
}

}  // namespace csiadv::cli
