#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "csiadv/grad/tape.hpp"

namespace csiadv::grad {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::string worst;  // "<param>[<index>]" of the largest error
};

/// Compares backward() against central finite differences for every element
/// of every listed parameter. `build` records a forward pass on the given tape
/// (registering the parameters through Tape::param) and returns the scalar loss.
/// Inputs to be checked are passed as parameters too.
///
/// Relative error per element is |a - f| / max(|a|, |f|, abs_floor).
template <typename Scalar>
GradCheckResult grad_check(const std::function<Var(Tape<Scalar>&)>& build,
                           const std::vector<Param<Scalar>*>& params, double step,
                           double abs_floor = 1e-8) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<Scalar> tape;
    tape.backward(build(tape));
  }
  auto eval = [&] {
    Tape<Scalar> tape;
    Var loss = build(tape);
    return static_cast<double>(tape.value(loss)[0]);
  };

  GradCheckResult result;
  for (auto* p : params) {
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar saved = p->value[i];
      p->value[i] = static_cast<Scalar>(static_cast<double>(saved) + step);
      const double up = eval();
      p->value[i] = static_cast<Scalar>(static_cast<double>(saved) - step);
      const double down = eval();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = static_cast<double>(p->grad[i]);
      const double denom = std::max({std::abs(analytic), std::abs(numeric), abs_floor});
      const double err = std::abs(analytic - numeric) / denom;
      ++result.checked;
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst = p->name + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

}  // namespace csiadv::grad
