#pragma once

#include <cstdint>
#include <vector>

#include "csd/attention.hpp"
#include "csd/mlp.hpp"
#include "csd/tensor.hpp"
#include "csd/voxel.hpp"

namespace csd {

/// Toy block-stack configuration. The token grid is grid_t x grid_h x grid_w;
/// N = grid_t*grid_h*grid_w must divide by chunk, the voxel volume must equal
/// chunk, and model_dim must equal heads * head_dim.
struct ModelConfig {
    int64_t batch = 1;
    int64_t grid_t = 2;
    int64_t grid_h = 8;
    int64_t grid_w = 8;
    int64_t model_dim = 64;
    int64_t head_dim = 16;
    int64_t heads = 4;
    int64_t mlp_hidden = 128;
    int64_t layers = 2;
    int64_t voxel_t = 1;
    int64_t voxel_h = 2;
    int64_t voxel_w = 2;
    int64_t chunk = 4;
    uint64_t seed = 1234;

    int64_t seq_len() const { return grid_t * grid_h * grid_w; }
    VoxelLayout voxel_layout() const {
        return VoxelLayout{grid_t, grid_h, grid_w, voxel_t, voxel_h, voxel_w};
    }
    void validate() const;
};

/// One block: multi-head attention with q/k/v/output projections followed by
/// a two-layer MLP, each added residually.
struct LayerWeights {
    Tensor wq, wk, wv, wo;  // [D x D]
    MlpWeights mlp;
};

struct ToyModel {
    ModelConfig cfg;
    std::vector<LayerWeights> layers;
};

/// Per-layer mutable cache state for a scheduled run.
struct LayerState {
    AttentionCache attn;
    MlpCache mlp;
};

struct ModelState {
    std::vector<LayerState> layers;
};

ModelState make_state(const ToyModel& model);

/// Seeded Gaussian initialization (std 1/sqrt(D)); identical seeds give
/// bit-identical weights.
ToyModel build_toy_model(const ModelConfig& cfg);

/// [B x N x D] @ [D x D] applied per batch slice.
Tensor project(const Tensor& x, const Tensor& w);
Tensor split_heads(const Tensor& x, int64_t heads, int64_t head_dim);
Tensor merge_heads(const Tensor& x);

/// Optional per-layer approximation-quality probe, called once per layer per
/// executed step. On dense steps exact == approx == the layer output (a
/// reference point for the probe to keep); on sparse steps `exact` is a dense
/// recomputation on the same inputs and `approx` the sparse output.
struct LayerProbe {
    virtual ~LayerProbe() = default;
    virtual void attention_sample(int64_t layer, bool dense_step, const Tensor& exact,
                                  const Tensor& approx) = 0;
    virtual void mlp_sample(int64_t layer, bool dense_step, const Tensor& exact,
                            const Tensor& approx) = 0;
};

struct SparsityConfig {
    int64_t attn_k = 0;  // keys recomputed per chunk (N = lossless)
    int64_t mlp_k = 0;   // neurons recomputed per chunk (F = lossless)
};

/// Fully dense forward pass of the whole stack (the baseline path).
Tensor model_forward_dense(const ToyModel& model, const Tensor& x);

/// Scheduled forward pass: every layer takes a dense or sparse step against
/// its cache. `probe`, when set, receives per-layer exact/approx samples
/// (instrumentation only; does not affect outputs). `static_attn`, when set,
/// is taken verbatim as every layer's attention sparsity pattern on dense
/// steps instead of the top-k selection.
Tensor model_forward_step(const ToyModel& model, ModelState& state, const Tensor& x,
                          bool dense_step, const SparsityConfig& sparsity,
                          LayerProbe* probe = nullptr, const SparseIndexSet* static_attn = nullptr);

}  // namespace csd
