#include <doctest.h>

#include <cmath>

#include "csiadv/attack/attack.hpp"
#include "csiadv/binary_io.hpp"
#include "csiadv/eval/nmse.hpp"
#include "csiadv/net/model_io.hpp"
#include "small_model.hpp"
#include "temp_dir.hpp"

using namespace csiadv::attack;
using csiadv::ConfigError;
using csiadv::ContractError;
using csiadv::DegenerateDataError;
using csiadv::DimensionError;
using csiadv::FormatError;
using csiadv::FormatErrorKind;
using csiadv::Rng;
using csiadv::grad::Shape;

namespace {

Tensor<float> vec(std::initializer_list<float> v) { return Tensor<float>(Shape{v.size()}, std::vector<float>(v)); }

double sq(const Tensor<float>& t) { return t.vec().cast<double>().squaredNorm(); }

AttackConfig quick_attack(double isr_db, std::size_t epochs = 5) {
  AttackConfig cfg;
  cfg.isr_db = isr_db;
  cfg.epochs = epochs;
  cfg.batch_size = 100;
  cfg.learning_rate = 1e-2;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_CASE("project_isr") {
  SUBCASE("forced arithmetic") {
    // ||p||^2 = 4, P_s = 100, ISR = -20 dB -> scale by 0.5
    const auto p = project_isr(vec({2.0f, 0.0f, 0.0f}), 100.0, db_to_linear(-20.0));
    CHECK(p[0] == doctest::Approx(1.0));
    CHECK(sq(p) == doctest::Approx(1.0));
  }
  SUBCASE("idempotent and direction preserving") {
    Rng rng(1);
    std::normal_distribution<float> d(0.0f, 1.0f);
    Tensor<float> p(Shape{64});
    for (auto& v : p.values()) v = d(rng);
    const auto once = project_isr(p, 3.0, 0.1);
    const auto twice = project_isr(once, 3.0, 0.1);
    for (std::size_t i = 0; i < 64; ++i) CHECK(twice[i] == doctest::Approx(once[i]).epsilon(1e-7));
    const double n0 = std::sqrt(sq(p)), n1 = std::sqrt(sq(once));
    for (std::size_t i = 0; i < 64; ++i) CHECK(once[i] / n1 == doctest::Approx(p[i] / n0).epsilon(1e-6));
  }
  SUBCASE("zero vector passes through") {
    const auto z = project_isr(Tensor<float>(Shape{4}), 1.0, 1.0);
    CHECK(sq(z) == 0.0);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(project_isr(vec({1.0f}), 0.0, 1.0), ContractError);
    CHECK_THROWS_AS(project_isr(vec({1.0f}), -1.0, 1.0), ContractError);
    CHECK_THROWS_AS(project_isr(vec({1.0f}), 1.0, 0.0), ContractError);
  }
}

TEST_CASE("apply_perturbation") {
  const auto s = vec({1.0f, -2.0f, 0.5f});
  const auto p = vec({0.25f, 0.5f, -1.0f});
  CHECK(apply_perturbation(s, Tensor<float>(Shape{3})) == s);
  const auto twice = apply_perturbation(apply_perturbation(s, p), p);
  for (std::size_t i = 0; i < 3; ++i) CHECK(twice[i] == s[i] + 2 * p[i]);
  const auto once = apply_perturbation(s, p);
  CHECK((once.vec() - s.vec()).norm() == doctest::Approx(p.vec().norm()));

  Tensor<float> batch(Shape{2, 3}, 1.0f);
  const auto shifted = apply_perturbation(batch, p);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t j = 0; j < 3; ++j) CHECK(shifted[r * 3 + j] == 1.0f + p[j]);

  CHECK_THROWS_AS(apply_perturbation(s, vec({1.0f, 2.0f})), DimensionError);
  CHECK_THROWS_AS(apply_perturbation(batch, Tensor<float>(Shape{1, 3})), DimensionError);
}

TEST_CASE("jamming_noise") {
  Rng rng(2);
  const auto n = jamming_noise(32, 1.0, rng);
  CHECK(sq(n) == doctest::Approx(1.0).epsilon(1e-6));

  Rng a(7), b(8);
  const auto na = jamming_noise(32, 2.5, a), nb = jamming_noise(32, 2.5, b);
  CHECK(sq(na) == doctest::Approx(sq(nb)).epsilon(1e-6));
  CHECK_FALSE(na == nb);

  // zero mean: each coordinate within 3 standard errors over 10^4 draws
  const std::size_t m = 16, draws = 10000;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(m), sum2 = Eigen::VectorXd::Zero(m);
  for (std::size_t k = 0; k < draws; ++k) {
    const Eigen::VectorXd x = jamming_noise(m, 1.0, rng).vec().cast<double>();
    sum += x;
    sum2 += x.cwiseProduct(x);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const double mean = sum[j] / draws;
    const double se = std::sqrt((sum2[j] / draws - mean * mean) / draws);
    CHECK(std::abs(mean) < 3 * se);
  }

  CHECK_THROWS_AS(jamming_noise(0, 1.0, rng), DimensionError);
  CHECK_THROWS_AS(jamming_noise(4, 0.0, rng), ContractError);
}

TEST_CASE("mean codeword power") {
  Tensor<float> s(Shape{2, 2}, std::vector<float>{3.0f, 4.0f, 0.0f, 1.0f});
  CHECK(mean_codeword_power(s) == doctest::Approx(13.0));
  CHECK_THROWS_AS(mean_codeword_power(Tensor<float>(Shape{0, 2})), DegenerateDataError);
}

TEST_CASE("crafting preconditions") {
  const auto& setup = small_setup();
  auto unfrozen = setup.model;
  unfrozen.set_trainable(true);
  CHECK_THROWS_WITH_AS(craft_perturbation(unfrozen, setup.train, quick_attack(-10.0)),
                       doctest::Contains("frozen"), ContractError);

  auto empty = setup.train;
  empty.samples = setup.train.slice(0, 0);
  CHECK_THROWS_AS(craft_perturbation(setup.model, empty, quick_attack(-10.0)), DegenerateDataError);

  auto bad = quick_attack(-10.0);
  bad.batch_size = 0;
  CHECK_THROWS_AS(craft_perturbation(setup.model, setup.train, bad), ConfigError);
  bad = quick_attack(std::nan(""));
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = quick_attack(-10.0);
  bad.learning_rate = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("zero epochs leaves p at zero") {
  const auto& setup = small_setup();
  const auto res = craft_perturbation(setup.model, setup.train, quick_attack(-10.0, 0));
  CHECK(res.epoch_loss.empty());
  CHECK(res.perturbation.size() == 32);
  CHECK(res.perturbation.power() == 0.0);
}

TEST_CASE("crafted perturbation sits on the ISR sphere and leaves the model untouched") {
  const auto& setup = small_setup();
  const auto before = csiadv::net::serialize_model(setup.model);
  for (double isr : {-30.0, -10.0, 0.0}) {
    const auto res = craft_perturbation(setup.model, setup.train, quick_attack(isr, 2));
    CHECK(std::abs(res.perturbation.isr_relative_error()) <= 1e-6);
    CHECK(res.perturbation.isr_db == isr);
    const auto s = csiadv::net::encode_batch(setup.model, setup.train.slice(0, setup.train.size()));
    CHECK(res.perturbation.reference_power == static_cast<float>(mean_codeword_power(s)));
  }
  CHECK(csiadv::net::serialize_model(setup.model) == before);
}

TEST_CASE("crafting is reproducible and ascends the loss") {
  const auto& setup = small_setup();
  const auto a = craft_perturbation(setup.model, setup.train, quick_attack(-10.0));
  const auto b = craft_perturbation(setup.model, setup.train, quick_attack(-10.0));
  CHECK(a.perturbation == b.perturbation);
  CHECK(a.epoch_loss == b.epoch_loss);
  REQUIRE(a.epoch_loss.size() == 5);
  CHECK(a.epoch_loss.back() >= a.epoch_loss.front());

  auto limited = quick_attack(-10.0);
  limited.max_samples = 100;
  CHECK_FALSE(craft_perturbation(setup.model, setup.train, limited).perturbation == a.perturbation);
}

TEST_CASE("adversarial perturbation beats power-matched jamming on held-out data") {
  const auto& setup = small_setup();
  const auto x = setup.held_out.slice(0, setup.held_out.size());
  const auto s = csiadv::net::encode_batch(setup.model, x);
  for (double isr : {-20.0, -10.0}) {
    const auto p = craft_perturbation(setup.model, setup.train, quick_attack(isr)).perturbation;
    const auto adv = csiadv::eval::nmse(x, csiadv::net::decode_batch(setup.model, apply_perturbation(s, p.values)));

    Rng rng(9);
    Tensor<float> jammed = s;
    const std::size_t m = s.dim(1);
    for (std::size_t i = 0; i < s.dim(0); ++i) {
      const auto n = jamming_noise(m, p.power(), rng);
      for (std::size_t j = 0; j < m; ++j) jammed[i * m + j] += n[j];
    }
    const auto jam = csiadv::eval::nmse(x, csiadv::net::decode_batch(setup.model, jammed));
    MESSAGE("ISR " << isr << " dB: adversarial " << adv.db << " dB, jamming " << jam.db << " dB");
    CHECK(adv.db > jam.db);
  }
}

TEST_CASE("rescaled perturbation keeps its direction") {
  const auto& setup = small_setup();
  const auto p = craft_perturbation(setup.model, setup.train, quick_attack(0.0, 1)).perturbation;
  const auto q = rescale_perturbation(p, -20.0);
  CHECK(q.isr_db == -20.0);
  CHECK(std::abs(q.isr_relative_error()) <= 1e-6);
  CHECK(q.power() == doctest::Approx(p.power() * 0.01).epsilon(1e-5));
}

TEST_CASE("perturbation files") {
  TempDir dir;
  Perturbation p{vec({0.5f, -0.25f, 1.0f, 2.0f}), -12.5, 3.75f};
  save_perturbation(p, dir / "p.csip");
  CHECK(load_perturbation(dir / "p.csip", 4) == p);

  auto kind = [&](const std::vector<char>& bytes, std::optional<std::size_t> m = std::nullopt) {
    csiadv::io::write_file(dir / "q.csip", bytes);
    try {
      load_perturbation(dir / "q.csip", m);
    } catch (const FormatError& e) {
      return e.kind();
    }
    FAIL("load_perturbation did not throw");
    return FormatErrorKind::kIo;
  };
  const auto bytes = csiadv::io::read_file(dir / "p.csip");
  CHECK(kind(bytes, 8) == FormatErrorKind::kShapeMismatch);
  auto magic = bytes;
  magic[3] = '?';
  CHECK(kind(magic) == FormatErrorKind::kBadMagic);
  auto version = bytes;
  version[5] = 1;
  CHECK(kind(version) == FormatErrorKind::kVersionMismatch);
  CHECK(kind({bytes.begin(), bytes.end() - 1}) == FormatErrorKind::kTruncated);
}
