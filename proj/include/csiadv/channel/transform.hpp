#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <Eigen/Dense>

#include "csiadv/errors.hpp"

namespace csiadv::channel {

template <typename Scalar>
using ComplexMatrix = Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, Eigen::Dynamic>;

/// Unitary DFT pair for H = F_d * H~ * F_a^H.
///
/// F_d[k,n] = exp(+j2pi kn/Ns)/sqrt(Ns) undoes the exp(-j2pi n tau/Ns) phase
/// ramp of a delay-tau path, so that path lands in delay row tau.
/// F_a[a,t] = exp(-j2pi at/Nt)/sqrt(Nt) is the ordinary unitary DFT.
template <typename Scalar>
class DftPlan {
 public:
  DftPlan(std::size_t ns, std::size_t nt) : fd_(dft(ns, +1)), fa_(dft(nt, -1)) {}

  std::size_t ns() const { return static_cast<std::size_t>(fd_.rows()); }
  std::size_t nt() const { return static_cast<std::size_t>(fa_.rows()); }
  const ComplexMatrix<Scalar>& delay() const { return fd_; }
  const ComplexMatrix<Scalar>& angle() const { return fa_; }

 private:
  static ComplexMatrix<Scalar> dft(std::size_t n, int sign) {
    ComplexMatrix<Scalar> f(n, n);
    const double norm = 1.0 / std::sqrt(static_cast<double>(n));
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        // reduce the exponent mod n before scaling to keep the phase exact
        const double phase = sign * 2.0 * std::numbers::pi * static_cast<double>((r * c) % n) /
                             static_cast<double>(n);
        f(r, c) = std::complex<Scalar>(static_cast<Scalar>(norm * std::cos(phase)),
                                       static_cast<Scalar>(norm * std::sin(phase)));
      }
    }
    return f;
  }

  ComplexMatrix<Scalar> fd_;
  ComplexMatrix<Scalar> fa_;
};

namespace detail {
template <typename Scalar>
void check_plan(const ComplexMatrix<Scalar>& m, const DftPlan<Scalar>& plan, const char* op) {
  if (static_cast<std::size_t>(m.rows()) != plan.ns() ||
      static_cast<std::size_t>(m.cols()) != plan.nt()) {
    throw DimensionError(std::string(op) + ": matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", plan is " + std::to_string(plan.ns()) +
                         "x" + std::to_string(plan.nt()));
  }
}
}  // namespace detail

/// Spatial-frequency -> angular-delay, full Ns x Nt.
template <typename Scalar>
ComplexMatrix<Scalar> to_angular_delay(const ComplexMatrix<Scalar>& raw, const DftPlan<Scalar>& plan) {
  detail::check_plan(raw, plan, "to_angular_delay");
  return plan.delay() * raw * plan.angle().adjoint();
}

template <typename Scalar>
ComplexMatrix<Scalar> from_angular_delay(const ComplexMatrix<Scalar>& h, const DftPlan<Scalar>& plan) {
  detail::check_plan(h, plan, "from_angular_delay");
  return plan.delay().adjoint() * h * plan.angle();
}

template <typename Scalar>
ComplexMatrix<Scalar> truncate_delay(const ComplexMatrix<Scalar>& full, std::size_t nc) {
  if (nc > static_cast<std::size_t>(full.rows())) {
    throw DimensionError("truncate_delay: Nc=" + std::to_string(nc) + " exceeds " +
                         std::to_string(full.rows()) + " delay rows");
  }
  return full.topRows(static_cast<Eigen::Index>(nc));
}

/// truncate_delay(to_angular_delay(raw), nc) without forming the discarded rows.
template <typename Scalar>
ComplexMatrix<Scalar> to_truncated_angular_delay(const ComplexMatrix<Scalar>& raw,
                                                 const DftPlan<Scalar>& plan, std::size_t nc) {
  detail::check_plan(raw, plan, "to_angular_delay");
  if (nc > plan.ns()) {
    throw DimensionError("truncate_delay: Nc=" + std::to_string(nc) + " exceeds " +
                         std::to_string(plan.ns()) + " delay rows");
  }
  return plan.delay().topRows(static_cast<Eigen::Index>(nc)) * raw * plan.angle().adjoint();
}

}  // namespace csiadv::channel
