#pragma once

#include "csd/tensor.hpp"

namespace csd {

/// Coefficient of determination of approx_delta against true_delta, computed
/// in 64-bit over all elements: 1 - SS_res / SS_tot. Throws NumericError when
/// true_delta has zero variance.
double r_squared(const Tensor& true_delta, const Tensor& approx_delta);

}  // namespace csd
