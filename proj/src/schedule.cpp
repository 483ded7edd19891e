#include "csd/schedule.hpp"

#include <algorithm>

#include "csd/error.hpp"

namespace csd {

const char* step_mode_name(StepMode m) {
    switch (m) {
        case StepMode::Dense: return "dense";
        case StepMode::Sparse: return "sparse";
        case StepMode::Skipped: return "skipped";
    }
    return "?";
}

int64_t StepSchedule::count(StepMode m) const {
    return std::count(modes.begin(), modes.end(), m);
}

void StepSchedule::validate() const {
    if (total_steps < 1 || static_cast<int64_t>(modes.size()) != total_steps) {
        throw ConfigError("schedule mode list does not cover total_steps");
    }
    if (modes[0] != StepMode::Dense) {
        throw ConfigError("schedule must start with a dense step");
    }
    bool have_dense = false;
    const int64_t start = step_cache ? (total_steps - window) / 2 : 0;
    for (int64_t s = 0; s < total_steps; ++s) {
        const StepMode m = modes[static_cast<size_t>(s)];
        if (m == StepMode::Dense) have_dense = true;
        if (m == StepMode::Sparse && !have_dense) {
            throw ConfigError("sparse step " + std::to_string(s) + " has no preceding dense step");
        }
        if (m == StepMode::Skipped && (!step_cache || s < start || s >= start + window)) {
            throw ConfigError("skipped step " + std::to_string(s) +
                              " outside the step-cache window");
        }
    }
}

StepSchedule resolve_schedule(int64_t total_steps, int64_t dense_interval, bool use_step_cache,
                              int64_t window, int64_t stride) {
    if (total_steps < 1) {
        throw ConfigError("total_steps must be >= 1, got " + std::to_string(total_steps));
    }
    if (dense_interval < 0) {
        throw ConfigError("dense_interval must be >= 0, got " + std::to_string(dense_interval));
    }
    if (use_step_cache) {
        if (window < 1 || window > total_steps) {
            throw ConfigError("step-cache window " + std::to_string(window) +
                              " outside [1, total_steps=" + std::to_string(total_steps) + "]");
        }
        if (stride < 1) {
            throw ConfigError("step-cache stride must be >= 1, got " + std::to_string(stride));
        }
    }

    StepSchedule sch;
    sch.total_steps = total_steps;
    sch.dense_interval = dense_interval;
    sch.step_cache = use_step_cache;
    sch.window = use_step_cache ? window : 0;
    sch.stride = use_step_cache ? stride : 0;
    sch.modes.resize(static_cast<size_t>(total_steps));

    const int64_t boundary = dense_interval + 1;
    for (int64_t s = 0; s < total_steps; ++s) {
        sch.modes[static_cast<size_t>(s)] =
            (s % boundary == 0) ? StepMode::Dense : StepMode::Sparse;
    }

    if (use_step_cache) {
        const int64_t start = (total_steps - window) / 2;
        for (int64_t s = start; s < start + window; ++s) {
            if (s == 0) continue;  // the schedule always opens with a real dense step
            if ((s - start) % stride != 0) {
                sch.modes[static_cast<size_t>(s)] = StepMode::Skipped;
            }
        }
    }
    sch.validate();
    return sch;
}

}  // namespace csd
