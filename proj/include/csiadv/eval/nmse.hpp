#pragma once

#include <cstddef>

#include "csiadv/grad/tensor.hpp"

namespace csiadv::eval {

struct NmseResult {
  double linear = 0.0;      // mean over used samples of ||H - H^||^2 / ||H||^2
  double db = 0.0;          // 10 log10(linear); -inf for a perfect reconstruction
  std::size_t used = 0;
  std::size_t excluded = 0;  // reference samples with zero norm after centring
};

/// NMSE between two equally shaped batches (leading axis = sample). Both are
/// shifted by -center before the ratio is taken.
NmseResult nmse(const grad::Tensor<float>& reference, const grad::Tensor<float>& reconstruction,
                double center = 0.5);

}  // namespace csiadv::eval
