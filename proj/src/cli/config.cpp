#include "csiadv/cli/config.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "csiadv/binary_io.hpp"
#include "csiadv/errors.hpp"

namespace csiadv::cli {

using nlohmann::json;

namespace {

// Walks one JSON object, rejecting keys that no reader asked for.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + ": expected an object");
  }

  void done() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.contains(key)) throw ConfigError("unknown key \"" + key_path(key) + "\"");
    }
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    if (const json* v = get(key)) out = convert<T>(*v, key_path(key));
  }

  template <typename T>
  static T convert(const json& v, const std::string& where) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(where + ": expected true or false");
      return v.get<bool>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<long long>() < 0)) {
        throw ConfigError(where + ": expected a non-negative integer");
      }
      return static_cast<T>(v.get<unsigned long long>());
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(where + ": expected a number");
      return v.get<double>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::filesystem::path>) {
      if (!v.is_string()) throw ConfigError(where + ": expected a path string");
      return std::filesystem::path(v.get<std::string>());
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw ConfigError(where + ": expected a list of numbers");
      std::vector<double> out;
      for (std::size_t i = 0; i < v.size(); ++i) {
        out.push_back(convert<double>(v[i], where + "[" + std::to_string(i) + "]"));
      }
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_generator(const json& j, const std::string& where, channel::ScenarioConfig& g) {
  ObjectReader r(j, where);
  r.read("ns", g.ns);
  r.read("nt", g.nt);
  r.read("nc", g.nc);
  r.read("clusters", g.clusters);
  r.read("paths_per_cluster", g.paths_per_cluster);
  r.read("max_delay_fraction", g.max_delay_fraction);
  r.read("cluster_delay_spread", g.cluster_delay_spread);
  r.read("angular_spread", g.angular_spread);
  r.read("angle_sector", g.angle_sector);
  r.done();
}

ScenarioPlan read_scenario(const json& j, const std::string& where, const RunConfig& base) {
  ObjectReader r(j, where);
  std::string name;
  r.read("name", name);
  if (name.empty()) throw ConfigError(r.key_path("name") + ": required");
  channel::Scenario s;
  try {
    s = channel::parse_scenario(name);
  } catch (const ConfigError& e) {
    throw ConfigError(r.key_path("name") + ": " + e.what());
  }
  ScenarioPlan plan;
  if (const ScenarioPlan* existing = base.find(s)) {
    plan = *existing;
  } else {
    plan.generator = channel::ScenarioConfig::preset(s);
  }
  plan.generator.scenario = s;
  r.read("gammas", plan.gammas);
  r.read("train_snr_db", plan.train_snr_db);
  r.read("hardened_gamma", plan.hardened_gamma);
  if (const json* g = r.get("generator")) read_generator(*g, r.key_path("generator"), plan.generator);
  r.done();
  return plan;
}

json plan_json(const ScenarioPlan& p) {
  const auto& g = p.generator;
  return json{{"name", std::string(channel::scenario_name(g.scenario))},
              {"gammas", p.gammas},
              {"train_snr_db", p.train_snr_db},
              {"hardened_gamma", p.hardened_gamma},
              {"generator",
               {{"ns", g.ns},
                {"nt", g.nt},
                {"nc", g.nc},
                {"clusters", g.clusters},
                {"paths_per_cluster", g.paths_per_cluster},
                {"max_delay_fraction", g.max_delay_fraction},
                {"cluster_delay_spread", g.cluster_delay_spread},
                {"angular_spread", g.angular_spread},
                {"angle_sector", g.angle_sector}}}};
}

}  // namespace

RunConfig RunConfig::desk() {
  RunConfig c;
  c.preset = "desk";
  ScenarioPlan indoor{channel::ScenarioConfig::indoor(), {0.25, 1.0 / 16, 1.0 / 32}, {10.0, 20.0}, 0.25};
  ScenarioPlan outdoor{channel::ScenarioConfig::outdoor(), {0.25}, {}, 0.25};
  c.scenarios = {indoor, outdoor};
  c.isr_db = {-30.0, -20.0, -10.0, 0.0};
  return c;
}

RunConfig RunConfig::paper() {
  RunConfig c = desk();
  c.preset = "paper";
  c.scenarios[1].train_snr_db = {10.0, 20.0};
  c.samples = SampleCounts{100000, 30000, 20000, 30000};
  c.step1.epochs = 200;
  c.step2.epochs = 10;
  c.isr_db = {-30.0, -25.0, -20.0, -15.0, -10.0, -5.0, 0.0};
  return c;
}

RunConfig RunConfig::preset_named(const std::string& name) {
  if (name == "desk") return desk();
  if (name == "paper") return paper();
  throw ConfigError("preset: expected \"desk\" or \"paper\", got \"" + name + "\"");
}

const ScenarioPlan* RunConfig::find(channel::Scenario s) const {
  for (const auto& p : scenarios) {
    if (p.generator.scenario == s) return &p;
  }
  return nullptr;
}

void RunConfig::override_seed(std::uint64_t seed) {
  seeds = Seeds{seed, seed + 1, seed + 2, seed + 3};
  for (auto& p : scenarios) p.generator.seed = seed;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& what) {
    throw ConfigError(key + ": " + what);
  };
  if (scenarios.empty()) fail("scenarios", "at least one scenario is required");
  std::set<channel::Scenario> names;
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    const auto& p = scenarios[i];
    const std::string key = "scenarios[" + std::to_string(i) + "]";
    if (!names.insert(p.generator.scenario).second) fail(key + ".name", "duplicate scenario");
    try {
      p.generator.validate();
    } catch (const ConfigError& e) {
      fail(key + ".generator", e.what());
    }
    if (p.gammas.empty()) fail(key + ".gammas", "at least one compression rate is required");
    for (double g : p.gammas) {
      if (!(g > 0.0 && g < 1.0)) fail(key + ".gammas", "each rate must lie in (0, 1)");
      const double m = g * 2.0 * p.generator.nc * p.generator.nt;
      if (std::abs(m - std::round(m)) > 1e-9) {
        fail(key + ".gammas", "rate " + std::to_string(g) + " gives a non-integral codeword length");
      }
    }
    if (!p.train_snr_db.empty() &&
        std::find(p.gammas.begin(), p.gammas.end(), p.hardened_gamma) == p.gammas.end()) {
      fail(key + ".hardened_gamma", "must be one of the scenario's gammas");
    }
    for (double s : p.train_snr_db) {
      if (!std::isfinite(s) || s < -20.0 || s > 100.0) fail(key + ".train_snr_db", "each SNR must lie in [-20, 100] dB");
    }
  }
  if (samples.train == 0) fail("samples.train", "must be positive");
  if (samples.test == 0) fail("samples.test", "must be positive");
  if (samples.attack == 0) fail("samples.attack", "must be positive");
  if (step1.epochs == 0) fail("step1.epochs", "must be positive");
  if (step1.batch_size == 0) fail("step1.batch_size", "must be positive");
  if (!(step1.learning_rate > 0.0)) fail("step1.learning_rate", "must be positive");
  if (step2.batch_size == 0) fail("step2.batch_size", "must be positive");
  if (!(step2.learning_rate > 0.0)) fail("step2.learning_rate", "must be positive");
  if (isr_db.empty()) fail("isr_db", "at least one ISR is required");
  for (std::size_t i = 0; i < isr_db.size(); ++i) {
    if (!std::isfinite(isr_db[i]) || isr_db[i] < -60.0 || isr_db[i] > 30.0) {
      fail("isr_db", "each ISR must lie in [-60, 30] dB");
    }
    if (i > 0 && !(isr_db[i] > isr_db[i - 1])) fail("isr_db", "values must be strictly increasing");
  }
  if (!(nmse_center >= 0.0 && nmse_center <= 1.0)) fail("nmse_center", "must lie in [0, 1]");
}

RunConfig parse_config(const std::string& json_text, const RunConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig c = base;
  {
    ObjectReader r(j, "");
    const json* version = r.get("schema_version");
    if (!version) throw ConfigError("schema_version: required");
    if (!version->is_number_integer() || version->get<long long>() != kSchemaVersion) {
      throw ConfigError("schema_version: expected " + std::to_string(kSchemaVersion) + ", got " +
                        version->dump());
    }
    r.read("preset", c.preset);
    if (const json* s = r.get("scenarios")) {
      if (!s->is_array()) throw ConfigError("scenarios: expected a list");
      c.scenarios.clear();
      for (std::size_t i = 0; i < s->size(); ++i) {
        c.scenarios.push_back(read_scenario((*s)[i], "scenarios[" + std::to_string(i) + "]", base));
      }
    }
    if (const json* s = r.get("samples")) {
      ObjectReader q(*s, "samples");
      q.read("train", c.samples.train);
      q.read("val", c.samples.val);
      q.read("test", c.samples.test);
      q.read("attack", c.samples.attack);
      q.done();
    }
    if (const json* s = r.get("step1")) {
      ObjectReader q(*s, "step1");
      q.read("epochs", c.step1.epochs);
      q.read("learning_rate", c.step1.learning_rate);
      q.read("batch_size", c.step1.batch_size);
      q.done();
    }
    if (const json* s = r.get("step2")) {
      ObjectReader q(*s, "step2");
      q.read("epochs", c.step2.epochs);
      q.read("learning_rate", c.step2.learning_rate);
      q.read("batch_size", c.step2.batch_size);
      q.read("rescale", c.step2.rescale);
      q.done();
    }
    r.read("isr_db", c.isr_db);
    r.read("nmse_center", c.nmse_center);
    if (const json* s = r.get("seeds")) {
      ObjectReader q(*s, "seeds");
      q.read("data", c.seeds.data);
      q.read("train", c.seeds.train);
      q.read("attack", c.seeds.attack);
      q.read("eval", c.seeds.eval);
      q.done();
    }
    if (const json* s = r.get("paths")) {
      ObjectReader q(*s, "paths");
      q.read("root", c.paths.root);
      q.read("data", c.paths.data);
      q.read("models", c.paths.models);
      q.read("perturbations", c.paths.perturbations);
      q.read("logs", c.paths.logs);
      q.read("reports", c.paths.reports);
      q.read("figures", c.paths.figures);
      q.done();
    }
    r.done();
  }
  for (auto& p : c.scenarios) p.generator.seed = c.seeds.data;
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path, const RunConfig& base) {
  std::vector<char> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const FormatError& e) {
    throw ConfigError(e.what());
  }
  return parse_config(std::string(bytes.begin(), bytes.end()), base);
}

std::string dump_config(const RunConfig& c) {
  json scen = json::array();
  for (const auto& p : c.scenarios) scen.push_back(plan_json(p));
  json j{{"schema_version", kSchemaVersion},
         {"preset", c.preset},
         {"scenarios", scen},
         {"samples",
          {{"train", c.samples.train},
           {"val", c.samples.val},
           {"test", c.samples.test},
           {"attack", c.samples.attack}}},
         {"step1",
          {{"epochs", c.step1.epochs},
           {"learning_rate", c.step1.learning_rate},
           {"batch_size", c.step1.batch_size}}},
         {"step2",
          {{"epochs", c.step2.epochs},
           {"learning_rate", c.step2.learning_rate},
           {"batch_size", c.step2.batch_size},
           {"rescale", c.step2.rescale}}},
         {"isr_db", c.isr_db},
         {"nmse_center", c.nmse_center},
         {"seeds",
          {{"data", c.seeds.data},
           {"train", c.seeds.train},
           {"attack", c.seeds.attack},
           {"eval", c.seeds.eval}}},
         {"paths",
          {{"root", c.paths.root.string()},
           {"data", c.paths.data.string()},
           {"models", c.paths.models.string()},
           {"perturbations", c.paths.perturbations.string()},
           {"logs", c.paths.logs.string()},
           {"reports", c.paths.reports.string()},
           {"figures", c.paths.figures.string()}}}};
  return j.dump(2) + "\n";
}

}  // namespace csiadv::cli
