#include "csd/memory.hpp"

#include <algorithm>

#include "csd/error.hpp"

namespace csd {

MemoryReport memory_report(const MemoryConfig& cfg) {
    if (cfg.batch < 1 || cfg.heads < 1 || cfg.seq_len < 1 || cfg.head_dim < 1 ||
        cfg.model_dim < 1 || cfg.chunk < 1 || cfg.layers < 1 || cfg.act_bytes < 1) {
        throw ConfigError("memory_report: all config fields must be >= 1");
    }
    if (cfg.seq_len % cfg.chunk != 0) {
        throw ConfigError("memory_report: seq_len not divisible by chunk");
    }
    if (cfg.mlp_caches && cfg.mlp_hidden < 1) {
        throw ConfigError("memory_report: mlp_hidden must be >= 1 when MLP caches are modeled");
    }
    const uint64_t b = static_cast<uint64_t>(cfg.batch);
    const uint64_t h = static_cast<uint64_t>(cfg.heads);
    const uint64_t n = static_cast<uint64_t>(cfg.seq_len);
    const uint64_t e = static_cast<uint64_t>(cfg.head_dim);
    const uint64_t d = static_cast<uint64_t>(cfg.model_dim);
    const uint64_t f = static_cast<uint64_t>(cfg.mlp_hidden);
    const uint64_t c = static_cast<uint64_t>(cfg.chunk);
    const uint64_t layers = static_cast<uint64_t>(cfg.layers);
    const uint64_t ab = static_cast<uint64_t>(cfg.act_bytes);
    const uint64_t chunks = n / c;

    MemoryReport r;

    // Masks: one bool per (chunk, key) for attention, per (chunk, neuron) for
    // MLP. torch.bool-style storage is 1 byte/element; packed is 1 bit.
    uint64_t mask_bits_per_layer = b * h * chunks * n;
    if (cfg.mlp_caches) mask_bits_per_layer += b * chunks * f;
    r.mask_naive_bytes = layers * mask_bits_per_layer;
    r.mask_packed_bytes = layers * ((mask_bits_per_layer + 7) / 8);
    r.mask_ratio = 8.0;  // per-element: 8 bits vs 1 bit

    // Activation caches: attention residual output + softmax constants, and
    // the MLP triple when enabled. Naive keeps every layer resident;
    // optimized double-buffers two layers while the rest live off-device.
    uint64_t act_per_layer = b * h * n * e * ab + 2 * b * h * n * ab;
    if (cfg.mlp_caches) {
        act_per_layer += b * chunks * f * ab + b * n * f * ab + b * n * d * ab;
    }
    r.act_naive_bytes = layers * act_per_layer;
    const uint64_t resident_layers = std::min<uint64_t>(layers, 2);
    r.act_resident_bytes = resident_layers * act_per_layer;
    r.act_ratio = static_cast<double>(r.act_naive_bytes) / static_cast<double>(r.act_resident_bytes);

    // Column-sum intermediate: materializing the approximate score matrix
    // costs B*H*N*N elements; accumulating chunk sums directly needs only
    // B*H*(N/c)*N, a factor of exactly c.
    r.colsum_naive_bytes = b * h * n * n * ab;
    r.colsum_chunked_bytes = b * h * chunks * n * ab;
    r.colsum_ratio = static_cast<double>(c);

    return r;
}

}  // namespace csd
