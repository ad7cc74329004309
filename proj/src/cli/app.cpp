#include "csiadv/cli/app.hpp"

#include <CLI11.hpp>
#include <chrono>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "csiadv/cli/pipeline.hpp"

namespace csiadv::cli {

namespace {

struct Options {
  std::string config;
  std::string preset;
  bool force = false;
  std::optional<std::uint64_t> seed;
  std::string out;
};

RunConfig resolve(const Options& o) {
  RunConfig base = RunConfig::preset_named(o.preset.empty() ? "desk" : o.preset);
  RunConfig cfg = o.config.empty() ? base : load_config(o.config, base);
  if (o.seed) cfg.override_seed(*o.seed);
  if (!o.out.empty()) cfg.paths.root = o.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Adversarial attacks on CsiNet CSI feedback"};
  app.require_subcommand(1);
  Options o;

  using Stage = void (Pipeline::*)();
  const std::vector<std::tuple<std::string, std::string, Stage>> stages{
      {"gen-data", "Synthesize and normalize channel datasets", &Pipeline::gen_data},
      {"train", "Step 1: train one CsiNet per rate and training SNR", &Pipeline::train},
      {"attack", "Step 2: craft one perturbation per model and ISR", &Pipeline::attack},
      {"eval", "Sweep ISR under no attack, adversarial and jamming", &Pipeline::eval},
      {"plot", "Render figures from the evaluation CSVs", &Pipeline::plot},
      {"repro", "Run every stage and write a hash manifest", &Pipeline::repro},
  };
  std::map<CLI::App*, Stage> dispatch;
  for (const auto& [name, help, stage] : stages) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
    sub->add_option("--preset", o.preset, "Base preset")->check(CLI::IsMember({"desk", "paper"}));
    sub->add_flag("--force", o.force, "Overwrite existing outputs");
    sub->add_option("--seed", o.seed, "Override all seeds (seed, seed+1, ...)");
    sub->add_option("--out", o.out, "Run directory (overrides paths.root)");
    dispatch.emplace(sub, stage);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  CLI::App* chosen = app.get_subcommands().front();
  auto log = [&out, start = std::chrono::steady_clock::now()](const std::string& msg) {
    const double t = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream line;
    line << "[" << std::fixed << std::setprecision(1) << std::setw(7) << t << "s] " << msg << "\n";
    out << line.str() << std::flush;
  };
  try {
    Pipeline pipeline(resolve(o), o.force, log);
    (pipeline.*dispatch.at(chosen))();
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace csiadv::cli
