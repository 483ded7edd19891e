#pragma once

#include <cstdint>

#include "csd/sparse_index.hpp"
#include "csd/tensor.hpp"

namespace csd {

/// Two-layer MLP weights: first layer w1 [F x D] + b1 [F], second layer
/// w2 [F x D] + b2 [D]. The layer computes gelu(x w1^T + b1) w2 + b2.
struct MlpWeights {
    Tensor w1;
    Tensor b1;
    Tensor w2;
    Tensor b2;

    int64_t hidden() const { return w1.dim(0); }
    int64_t model_dim() const { return w1.dim(1); }
    void validate() const;
};

/// Per-layer MLP cache, refreshed on dense steps.
/// tile_means holds the chunk means of the bias-free first-layer
/// preactivation; its cross-step change ranks neurons for recomputation.
/// activations and outputs are updated in place by sparse steps for the
/// recomputed neurons, so later sparse steps measure against the newest
/// recomputation while tile_means stays pinned to the last dense step.
struct MlpCache {
    Tensor tile_means;   // [B x N/c x F]
    Tensor activations;  // [B x N x F]
    Tensor outputs;      // [B x N x D]
    SparseIndexSet indices;
    int64_t age = 0;
    bool initialized = false;
};

struct MlpDenseResult {
    Tensor output;  // [B x N x D]
    Tensor preact;  // [B x N x F], includes b1
    Tensor act;     // gelu(preact)
};

MlpDenseResult dense_mlp(const Tensor& x, const MlpWeights& w);

/// Chunk means of the bias-free preactivation: chunk_mean(x) @ w1^T.
Tensor mlp_tile_means(const Tensor& x, const Tensor& w1, int64_t chunk);

/// Ranks neurons per token chunk by |tile_means(x) - cached tile means| and
/// keeps the top k (lower index wins ties).
SparseIndexSet mlp_change_indices(const Tensor& x, const Tensor& w1, const Tensor& tile_means,
                                  int64_t k, int64_t chunk);

/// One-pass sparse delta: recomputes the selected neurons' activations,
/// subtracts the cached ones, pushes the difference through the selected w2
/// rows, and accumulates into the cached output. Updates the cache in place
/// (activations for the recomputed set, outputs wholesale) and returns the
/// new output.
Tensor sparse_delta_mlp(const Tensor& x, const MlpWeights& w, const SparseIndexSet& indices,
                        MlpCache& cache);

/// One MLP step: dense -> full computation + cache refresh; sparse -> change
/// detection against the cached tile means, then the one-pass delta.
Tensor mlp_step(const Tensor& x, const MlpWeights& w, MlpCache& cache, bool dense_step,
                int64_t top_k, int64_t chunk);

}  // namespace csd
