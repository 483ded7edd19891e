#pragma once

#include <optional>
#include <string>
#include <vector>

#include "csd/config.hpp"
#include "csd/flops.hpp"
#include "csd/memory.hpp"
#include "csd/metrics.hpp"
#include "csd/model.hpp"
#include "csd/schedule.hpp"
#include "csd/sparse_index.hpp"

namespace csd {

enum class RunMode { DenseBaseline, SparseDelta };

struct ScheduleParams {
    int64_t total_steps = 20;
    int64_t dense_interval = 10;
    bool step_cache = false;
    int64_t window = 0;
    int64_t stride = 1;
};

struct RunRequest {
    ModelConfig model;
    ScheduleParams schedule;
    SparsityConfig sparsity;
    RunMode mode = RunMode::SparseDelta;
    bool collect_layer_r2 = true;
    const SparseIndexSet* static_attn_pattern = nullptr;  // applied verbatim on dense steps
    std::string save_latent_path;  // when set, dump the decoded final latent ("CSDT")
};

struct StepReport {
    int64_t step = 0;
    StepMode mode = StepMode::Dense;
    std::optional<double> attn_r2;    // mean over layers, sparse steps only
    std::optional<double> mlp_r2;     // mean over layers, sparse steps only
    std::optional<double> latent_r2;  // vs the dense baseline trajectory
};

struct RunReport {
    int schema = 1;
    RunMode mode = RunMode::SparseDelta;
    ModelConfig model;
    StepSchedule schedule;
    SparsityConfig sparsity;
    std::vector<StepReport> steps;
    std::optional<double> end_to_end_r2;  // final latent vs dense baseline
    std::optional<double> attn_r2_mean;
    std::optional<double> mlp_r2_mean;
    FlopReport flops;
    MemoryReport memory;
    std::string latent_digest;  // over the decoded-grid-order final latent
};

/// Runs total_steps forward passes over a seeded noise latent, voxel-ordered
/// once up front and restored to grid order at the end. Every step adds
/// (1/total_steps) * model_output to the latent; skipped steps reuse the last
/// computed model output. SparseDelta mode also runs the dense baseline
/// internally to report end-to-end and per-step latent R^2.
RunReport run_generation(const RunRequest& req);

struct SweepRow {
    int64_t attn_k = 0;
    int64_t mlp_k = 0;
    double attn_sparsity = 0.0;
    double mlp_sparsity = 0.0;
    double end_to_end_r2 = 0.0;
    std::optional<double> attn_r2_mean;
    std::optional<double> mlp_r2_mean;
    double ideal_speedup = 1.0;
    std::string latent_digest;
};

/// One scheduled run per attention-k; MLP stays at the requested k
/// (lossless by default so the sweep isolates attention sparsity).
std::vector<SweepRow> sweep_attention_k(const RunRequest& base, const std::vector<int64_t>& ks);

std::string run_report_json(const RunReport& report);
std::string sweep_csv(const std::vector<SweepRow>& rows);

/// Externally measured kernel speedup shown for context next to the analytic
/// ideal speedup; this harness never measures hardware.
struct ReferenceFigures {
    double column_sparse_attention_speedup_at_93pct = 9.3;
};

ModelConfig model_config_from(const ConfigMap& cfg);
ScheduleParams schedule_params_from(const ConfigMap& cfg);
/// attn_k/mlp_k win over attn_sparsity/mlp_sparsity (fraction of the domain
/// NOT recomputed); defaults are lossless.
SparsityConfig sparsity_from(const ConfigMap& cfg, const ModelConfig& model);

}  // namespace csd
