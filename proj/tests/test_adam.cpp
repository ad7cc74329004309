#include <doctest.h>

#include <cmath>

#include "csiadv/grad/adam.hpp"
#include "csiadv/grad/tape.hpp"

using namespace csiadv::grad;

namespace {

// Scalar Adam written out from the update rule, in double.
struct ReferenceAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double x, double g, const AdamConfig& c) {
    ++t;
    m = c.beta1 * m + (1 - c.beta1) * g;
    v = c.beta2 * v + (1 - c.beta2) * g * g;
    const double mh = m / (1 - std::pow(c.beta1, t));
    const double vh = v / (1 - std::pow(c.beta2, t));
    return x - c.learning_rate * mh / (std::sqrt(vh) + c.epsilon);
  }
};

}  // namespace

TEST_CASE("first step moves every coordinate by the learning rate against the gradient sign") {
  Param<double> p("p", Tensor<double>(Shape{3}, std::vector<double>{1.0, -2.0, 0.5}));
  p.grad = Tensor<double>(Shape{3}, std::vector<double>{4.0, -0.01, 1e3});
  AdamState<double> s(p.value.shape());
  AdamConfig cfg;
  adam_step(p, s, cfg);
  CHECK(p.value[0] == doctest::Approx(1.0 - 1e-3).epsilon(1e-9));
  CHECK(p.value[1] == doctest::Approx(-2.0 + 1e-3).epsilon(1e-6));
  CHECK(p.value[2] == doctest::Approx(0.5 - 1e-3).epsilon(1e-9));
  CHECK(s.step == 1);
}

TEST_CASE("updates match the written-out rule over many steps") {
  AdamConfig cfg{0.05, 0.8, 0.99, 1e-8};
  Param<double> p("p", Tensor<double>(Shape{1}, 3.0));
  AdamState<double> s(p.value.shape());
  ReferenceAdam ref;
  double x = 3.0;
  for (int i = 0; i < 50; ++i) {
    const double g = 2 * p.value[0] + std::sin(i);
    p.grad[0] = g;
    adam_step(p, s, cfg);
    x = ref.step(x, g, cfg);
    CHECK(p.value[0] == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("minimizes a quadratic through the tape") {
  Param<double> w("w", Tensor<double>(Shape{2}, std::vector<double>{5.0, -3.0}));
  Adam<double> opt({&w}, AdamConfig{0.1});
  const Tensor<double> target(Shape{2}, std::vector<double>{1.0, 2.0});
  for (int i = 0; i < 500; ++i) {
    Tape<double> t;
    Var loss = t.mse(t.param(w), t.constant(target));
    opt.zero_grad();
    t.backward(loss);
    opt.step();
  }
  CHECK(w.value[0] == doctest::Approx(1.0).epsilon(1e-2));
  CHECK(w.value[1] == doctest::Approx(2.0).epsilon(1e-2));
}

TEST_CASE("zero gradient leaves the parameter in place") {
  Param<float> p("p", Tensor<float>(Shape{4}, 1.25f));
  Adam<float> opt({&p}, AdamConfig{});
  opt.step();
  CHECK(p.value == Tensor<float>(Shape{4}, 1.25f));
}

TEST_CASE("frozen parameters are skipped and their state does not advance") {
  Param<double> p("p", Tensor<double>(Shape{1}, 1.0), false);
  p.grad[0] = 1.0;
  Adam<double> opt({&p}, AdamConfig{});
  opt.step();
  CHECK(p.value[0] == 1.0);
  CHECK(opt.state(0).step == 0);
}

TEST_CASE("state of the wrong shape is rejected") {
  Param<double> p("p", Tensor<double>(Shape{2}, 1.0));
  AdamState<double> s(Shape{3});
  CHECK_THROWS_AS(adam_step(p, s, AdamConfig{}), csiadv::DimensionError);
}
