#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "csiadv/errors.hpp"
#include "csiadv/grad/tensor.hpp"

namespace csiadv::grad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
struct AdamState {
  AdamState() = default;
  explicit AdamState(const Shape& shape) : m(shape), v(shape) {}

  Tensor<Scalar> m;
  Tensor<Scalar> v;
  std::uint64_t step = 0;
};

/// One bias-corrected Adam update of a single parameter. Frozen parameters
/// are left untouched (and their state does not advance).
template <typename Scalar>
void adam_step(Param<Scalar>& p, AdamState<Scalar>& state, const AdamConfig& cfg) {
  if (!p.trainable) return;
  if (state.m.shape() != p.value.shape() || state.v.shape() != p.value.shape()) {
    throw DimensionError("adam: state " + shape_string(state.m.shape()) + " vs parameter " +
                         p.name + " " + shape_string(p.value.shape()));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(cfg.beta1, t);
  const double c2 = 1.0 - std::pow(cfg.beta2, t);
  for (std::size_t i = 0; i < p.value.size(); ++i) {
    const double g = static_cast<double>(p.grad[i]);
    const double m = cfg.beta1 * static_cast<double>(state.m[i]) + (1.0 - cfg.beta1) * g;
    const double v = cfg.beta2 * static_cast<double>(state.v[i]) + (1.0 - cfg.beta2) * g * g;
    state.m[i] = static_cast<Scalar>(m);
    state.v[i] = static_cast<Scalar>(v);
    const double update = cfg.learning_rate * (m / c1) / (std::sqrt(v / c2) + cfg.epsilon);
    p.value[i] = static_cast<Scalar>(static_cast<double>(p.value[i]) - update);
  }
}

/// Adam over a fixed, ordered list of parameters.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Param<Scalar>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    states_.reserve(params_.size());
    for (const auto* p : params_) states_.emplace_back(p->value.shape());
  }

  void step() {
    for (std::size_t i = 0; i < params_.size(); ++i) adam_step(*params_[i], states_[i], cfg_);
  }

  void zero_grad() {
    for (auto* p : params_) p->zero_grad();
  }

  const AdamConfig& config() const { return cfg_; }
  const AdamState<Scalar>& state(std::size_t i) const { return states_.at(i); }

 private:
  std::vector<Param<Scalar>*> params_;
  std::vector<AdamState<Scalar>> states_;
  AdamConfig cfg_;
};

}  // namespace csiadv::grad
