#pragma once

#include <cstdint>

#include "csd/sparse_index.hpp"
#include "csd/tensor.hpp"

namespace csd {

/// Per-layer attention cache. `residual_output` holds the last dense output
/// minus the sparse part recomputable from `indices`, so a sparse step only
/// has to add its freshly computed delta back.
struct AttentionCache {
    Tensor residual_output;  // [B x H x N x E]
    SoftmaxStats stats;      // scaled-logit row constants from the last dense step
    SparseIndexSet indices;
    int64_t age = 0;  // sparse steps since the last dense refresh
    bool initialized = false;
};

struct ColumnSumAttentionResult {
    Tensor output;       // exact dense attention output [B x H x N x E]
    Tensor column_sums;  // attention mass per key per query chunk [B x H x N/c x N]
    SoftmaxStats stats;  // fresh row constants of the scaled logits
};

/// Exact dense attention softmax(q k^T / sqrt(E)) @ v for [B x H x N x E]
/// inputs. Shared by the dense baseline and the dense refresh step so the two
/// agree bit-for-bit.
Tensor dense_attention(const Tensor& q, const Tensor& k, const Tensor& v);

/// Dense attention plus the chunked column-sum selection signal. The output
/// and stats are exact; the column sums normalize each row with `prev_stats`
/// when given (stale constants from the previous step) and with the fresh
/// constants otherwise, in which case they are exact chunk sums of the
/// attention probabilities.
ColumnSumAttentionResult column_sum_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const SoftmaxStats* prev_stats, int64_t chunk);

/// For each query chunk, softmax over only the gathered keys (normalized over
/// the selected subset), times the gathered values, scaled by `scale`
/// (+1 or -1) and added onto `base`. Chunks with count 0 pass `base` through.
Tensor sparse_delta_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                              const SparseIndexSet& indices, const Tensor& base, float scale);

/// One attention step. Dense: computes exact attention, refreshes stats,
/// selects top-k indices from the column sums (or takes `static_indices`
/// verbatim), and stores output-minus-sparse-part in the cache. Sparse: adds
/// the recomputed sparse part for the cached indices onto the cached residual.
Tensor attention_step(const Tensor& q, const Tensor& k, const Tensor& v, AttentionCache& cache,
                      bool dense_step, int64_t top_k, int64_t chunk,
                      const SparseIndexSet* static_indices = nullptr);

}  // namespace csd
