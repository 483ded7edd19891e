#include "csd/metrics.hpp"

namespace csd {

double r_squared(const Tensor& true_delta, const Tensor& approx_delta) {
    if (true_delta.shape() != approx_delta.shape()) {
        throw ShapeError("r_squared shapes disagree: " + shape_str(true_delta.shape()) + " vs " +
                         shape_str(approx_delta.shape()));
    }
    const int64_t n = true_delta.numel();
    const float* t = true_delta.data();
    const float* a = approx_delta.data();

    double mean = 0.0;
    for (int64_t i = 0; i < n; ++i) mean += static_cast<double>(t[i]);
    mean /= static_cast<double>(n);

    double ss_res = 0.0;
    double ss_tot = 0.0;
    for (int64_t i = 0; i < n; ++i) {
        const double tv = static_cast<double>(t[i]);
        const double av = static_cast<double>(a[i]);
        ss_res += (tv - av) * (tv - av);
        ss_tot += (tv - mean) * (tv - mean);
    }
    if (ss_tot == 0.0) {
        throw NumericError("r_squared undefined: true delta has zero variance");
    }
    return 1.0 - ss_res / ss_tot;
}

}  // namespace csd
