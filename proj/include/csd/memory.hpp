#pragma once

#include <cstdint>
#include <string>

namespace csd {

/// Shape parameters for the cache memory model. act_bytes is the element
/// width of activation-like tensors (4 at desk scale; large-model presets use
/// 2 to mirror half-precision deployments). mlp_caches toggles whether MLP
/// sparsity (and therefore its caches) is in play.
struct MemoryConfig {
    int64_t batch = 1;
    int64_t heads = 1;
    int64_t seq_len = 0;     // N
    int64_t head_dim = 0;    // E
    int64_t model_dim = 0;   // D
    int64_t mlp_hidden = 0;  // F
    int64_t chunk = 1;       // c
    int64_t layers = 1;
    int64_t act_bytes = 4;
    bool mlp_caches = true;
};

/// Byte counts for the three cache families, each with a naive-equivalent
/// figure and the footprint after its optimization:
///   masks: 1 byte/element -> 1 bit/element (ratio exactly 8)
///   activations: all layers resident -> 2 layers resident (offload model)
///   column sums: materialized score matrix -> direct chunk accumulation
///                (ratio exactly chunk)
struct MemoryReport {
    uint64_t mask_naive_bytes = 0;
    uint64_t mask_packed_bytes = 0;
    double mask_ratio = 8.0;

    uint64_t act_naive_bytes = 0;
    uint64_t act_resident_bytes = 0;
    double act_ratio = 1.0;

    uint64_t colsum_naive_bytes = 0;
    uint64_t colsum_chunked_bytes = 0;
    double colsum_ratio = 1.0;
};

MemoryReport memory_report(const MemoryConfig& cfg);

}  // namespace csd
