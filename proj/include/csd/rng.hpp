#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace csd {

/// Deterministic Gaussian source: mt19937_64 + Box-Muller. Unlike
/// std::normal_distribution, the byte stream is identical across standard
/// libraries, so seeded runs digest the same everywhere.
class GaussianRng {
public:
    explicit GaussianRng(uint64_t seed) : engine_(seed) {}

    float next(float mean = 0.0f, float stddev = 1.0f) {
        if (have_spare_) {
            have_spare_ = false;
            return mean + stddev * spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform01();
        } while (u1 <= 1e-300);
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * M_PI * u2;
        spare_ = static_cast<float>(r * std::sin(theta));
        have_spare_ = true;
        return mean + stddev * static_cast<float>(r * std::cos(theta));
    }

    double uniform01() {
        // 53-bit uniform in [0, 1).
        return static_cast<double>(engine_() >> 11) * (1.0 / 9007199254740992.0);
    }

    uint64_t next_u64() { return engine_(); }

private:
    std::mt19937_64 engine_;
    float spare_ = 0.0f;
    bool have_spare_ = false;
};

}  // namespace csd
