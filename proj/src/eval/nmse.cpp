#include "csiadv/eval/nmse.hpp"

#include <cmath>
#include <limits>

#include "csiadv/errors.hpp"

namespace csiadv::eval {

NmseResult nmse(const grad::Tensor<float>& reference, const grad::Tensor<float>& reconstruction,
                double center) {
  if (reference.shape() != reconstruction.shape()) {
    throw DimensionError("nmse: reference " + grad::shape_string(reference.shape()) +
                         " vs reconstruction " + grad::shape_string(reconstruction.shape()));
  }
  if (reference.rank() < 1 || reference.dim(0) == 0) {
    throw DegenerateDataError("nmse: no samples");
  }
  const std::size_t count = reference.dim(0);
  const std::size_t per = reference.size() / count;
  NmseResult r;
  double sum = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const float* h = reference.data() + i * per;
    const float* g = reconstruction.data() + i * per;
    double err = 0.0;
    double ref = 0.0;
    for (std::size_t j = 0; j < per; ++j) {
      const double hc = static_cast<double>(h[j]) - center;
      const double d = hc - (static_cast<double>(g[j]) - center);
      err += d * d;
      ref += hc * hc;
    }
    if (ref == 0.0) {
      ++r.excluded;
      continue;
    }
    sum += err / ref;
    ++r.used;
  }
  if (r.used == 0) {
    throw DegenerateDataError("nmse: every reference sample has zero norm");
  }
  r.linear = sum / static_cast<double>(r.used);
  r.db = r.linear == 0.0 ? -std::numeric_limits<double>::infinity() : 10.0 * std::log10(r.linear);
  return r;
}

}  // namespace csiadv::eval
