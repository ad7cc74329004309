#include <doctest.h>

#include <cmath>
#include <limits>

#include "csiadv/channel/dataset.hpp"
#include "csiadv/net/model_io.hpp"
#include "csiadv/net/train.hpp"

using namespace csiadv::net;
using csiadv::ConfigError;
using csiadv::DegenerateDataError;
using csiadv::DimensionError;
using csiadv::channel::Dataset;
using csiadv::channel::ScenarioConfig;

namespace {

ScenarioConfig small_scenario() {
  ScenarioConfig cfg;
  cfg.nc = 8;
  cfg.nt = 8;
  return cfg;
}

Dataset make_dataset(const ScenarioConfig& cfg, std::size_t count, std::uint64_t first = 0) {
  return csiadv::channel::normalize_dataset(cfg, csiadv::channel::synth_truncated(cfg, first, count));
}

}  // namespace

TEST_CASE("one epoch on ten samples gives one history entry") {
  const auto ds = make_dataset(small_scenario(), 10);
  TrainConfig tc;
  tc.epochs = 1;
  tc.batch_size = 4;  // last batch is partial
  const auto res = train(ds, ModelConfig{8, 8, 16}, tc, &ds);
  REQUIRE(res.history.size() == 1);
  CHECK(res.history[0].epoch == 1);
  CHECK(std::isfinite(res.history[0].train_loss));
  REQUIRE(res.history[0].val_loss.has_value());
  CHECK(*res.history[0].val_loss == doctest::Approx(reconstruction_mse(res.model, ds)));
}

TEST_CASE("fixed seed reproduces the loss history bit-exactly") {
  const auto ds = make_dataset(small_scenario(), 60);
  TrainConfig tc;
  tc.epochs = 3;
  tc.batch_size = 20;
  tc.seed = 5;
  tc.snr_db = 10.0;
  const auto a = train(ds, ModelConfig{8, 8, 16}, tc);
  const auto b = train(ds, ModelConfig{8, 8, 16}, tc);
  for (std::size_t e = 0; e < 3; ++e) CHECK(a.history[e].train_loss == b.history[e].train_loss);
  CHECK(serialize_model(a.model) == serialize_model(b.model));

  tc.seed = 6;
  const auto c = train(ds, ModelConfig{8, 8, 16}, tc);
  CHECK(c.history[2].train_loss != a.history[2].train_loss);
}

TEST_CASE("max_samples restricts the training set") {
  const auto ds = make_dataset(small_scenario(), 40);
  Dataset head = ds;
  head.samples = ds.slice(0, 20);
  TrainConfig tc;
  tc.epochs = 2;
  tc.batch_size = 10;
  tc.max_samples = 20;
  const auto a = train(ds, ModelConfig{8, 8, 16}, tc);
  tc.max_samples.reset();
  const auto b = train(head, ModelConfig{8, 8, 16}, tc);
  CHECK(a.history[1].train_loss == b.history[1].train_loss);
}

TEST_CASE("training errors") {
  const auto ds = make_dataset(small_scenario(), 10);
  TrainConfig tc;
  tc.epochs = 1;
  CHECK_THROWS_AS(train(ds, ModelConfig{4, 4, 8}, tc), DimensionError);

  Dataset empty = ds;
  empty.samples = ds.slice(0, 0);
  CHECK_THROWS_AS(train(empty, ModelConfig{8, 8, 16}, tc), DegenerateDataError);
  tc.max_samples = 0;
  CHECK_THROWS_AS(train(ds, ModelConfig{8, 8, 16}, tc), DegenerateDataError);
  CHECK_THROWS_AS(reconstruction_mse(build_model<float>(ModelConfig{8, 8, 16}, 1), empty),
                  DegenerateDataError);

  TrainConfig bad;
  bad.epochs = 0;
  CHECK_THROWS_AS(train(ds, ModelConfig{8, 8, 16}, bad), ConfigError);
  bad = TrainConfig{};
  bad.batch_size = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.learning_rate = -1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.snr_db = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("desk-scale run at least halves the training loss") {
  const auto ds = make_dataset(ScenarioConfig::indoor(), 5000);
  TrainConfig tc;  // defaults: 50 epochs, batch 200, lr 1e-3
  const auto res = train(ds, ModelConfig::from_rate(0.25), tc);
  REQUIRE(res.history.size() == 50);
  const double initial = res.history.front().train_loss;
  const double final_loss = res.history.back().train_loss;
  MESSAGE("epoch-1 loss " << initial << ", epoch-50 loss " << final_loss);
  CHECK(final_loss < 0.5 * initial);
}
