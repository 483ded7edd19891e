#pragma once

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <string>

#include "csd/rng.hpp"
#include "csd/tensor.hpp"

// Minimal check helpers shared by the test mains. Failures print the
// expression and location, then abort the binary (non-zero exit for ctest).

#define CHECK(cond)                                                                     \
    do {                                                                                \
        if (!(cond)) {                                                                  \
            std::fprintf(stderr, "CHECK failed: %s at %s:%d\n", #cond, __FILE__,        \
                         __LINE__);                                                     \
            std::abort();                                                               \
        }                                                                               \
    } while (0)

#define CHECK_CLOSE(a, b, tol)                                                          \
    do {                                                                                \
        const double va = static_cast<double>(a);                                       \
        const double vb = static_cast<double>(b);                                       \
        if (!(std::fabs(va - vb) <= (tol))) {                                           \
            std::fprintf(stderr, "CHECK_CLOSE failed: %s=%.12g vs %s=%.12g (tol %g) "   \
                         "at %s:%d\n", #a, va, #b, vb, static_cast<double>(tol),        \
                         __FILE__, __LINE__);                                           \
            std::abort();                                                               \
        }                                                                               \
    } while (0)

#define CHECK_THROWS(ExceptionType, expr)                                               \
    do {                                                                                \
        bool thrown = false;                                                            \
        try {                                                                           \
            (void)(expr);                                                               \
        } catch (const ExceptionType&) {                                                \
            thrown = true;                                                              \
        }                                                                               \
        if (!thrown) {                                                                  \
            std::fprintf(stderr, "CHECK_THROWS failed: %s did not throw %s at %s:%d\n", \
                         #expr, #ExceptionType, __FILE__, __LINE__);                    \
            std::abort();                                                               \
        }                                                                               \
    } while (0)

inline csd::Tensor random_tensor(std::vector<int64_t> shape, uint64_t seed, float stddev = 1.0f) {
    csd::GaussianRng rng(seed);
    csd::Tensor t(std::move(shape));
    for (int64_t i = 0; i < t.numel(); ++i) t[i] = rng.next(0.0f, stddev);
    return t;
}

inline double max_abs_diff(const csd::Tensor& a, const csd::Tensor& b) {
    CHECK(a.shape() == b.shape());
    double m = 0.0;
    for (int64_t i = 0; i < a.numel(); ++i) {
        m = std::max(m, std::fabs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
    }
    return m;
}
