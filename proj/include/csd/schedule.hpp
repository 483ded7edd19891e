#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace csd {

enum class StepMode { Dense, Sparse, Skipped };

const char* step_mode_name(StepMode m);

/// Resolved per-step execution plan. Step 0 is always dense; skipped steps
/// only occur inside the centered step-cache window; every sparse step has a
/// dense step somewhere before it.
struct StepSchedule {
    int64_t total_steps = 0;
    int64_t dense_interval = 0;  // sparse steps between dense refreshes; 0 = all dense
    bool step_cache = false;
    int64_t window = 0;  // W
    int64_t stride = 0;  // n
    std::vector<StepMode> modes;

    int64_t count(StepMode m) const;
    void validate() const;
};

/// Builds the plan: a dense refresh at step 0 and at every
/// (dense_interval + 1) boundary, sparse in between. With the step cache on,
/// steps inside the centered window of `window` steps that are off the
/// `stride` grid are skipped outright (step 0 is never skipped); skipped
/// steps reuse the previous model output and advance no caches.
StepSchedule resolve_schedule(int64_t total_steps, int64_t dense_interval,
                              bool use_step_cache = false, int64_t window = 0,
                              int64_t stride = 1);

}  // namespace csd
