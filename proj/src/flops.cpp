#include "csd/flops.hpp"

#include <algorithm>

namespace csd {

std::string flops_str(flops_t v) {
    if (v == 0) return "0";
    std::string s;
    while (v > 0) {
        s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
        v /= 10;
    }
    std::reverse(s.begin(), s.end());
    return s;
}

double flops_double(flops_t v) {
    return static_cast<double>(static_cast<long double>(v));
}

double FlopReport::ideal_speedup() const {
    const flops_t actual = total_actual();
    if (actual == 0) return 1.0;
    return static_cast<double>(static_cast<long double>(total_dense_equiv()) /
                               static_cast<long double>(actual));
}

namespace {

flops_t u(int64_t v) { return static_cast<flops_t>(v); }

}  // namespace

flops_t dense_attention_flops(const ModelConfig& cfg) {
    const flops_t n = u(cfg.seq_len());
    return 4 * u(cfg.batch) * u(cfg.heads) * n * n * u(cfg.head_dim);
}

flops_t sparse_attention_flops(const ModelConfig& cfg, int64_t k) {
    const flops_t n = u(cfg.seq_len());
    return 4 * u(cfg.batch) * u(cfg.heads) * n * u(k) * u(cfg.head_dim);
}

flops_t dense_mlp_flops(const ModelConfig& cfg) {
    return 4 * u(cfg.batch) * u(cfg.seq_len()) * u(cfg.model_dim) * u(cfg.mlp_hidden);
}

flops_t sparse_mlp_flops(const ModelConfig& cfg, int64_t k) {
    const flops_t gemm = 4 * u(cfg.batch) * u(cfg.seq_len()) * u(cfg.model_dim) * u(k);
    const flops_t select = 2 * u(cfg.batch) * u(cfg.seq_len() / cfg.chunk) * u(cfg.model_dim) *
                           u(cfg.mlp_hidden);
    return gemm + select;
}

FlopReport account_flops(const ModelConfig& cfg, const StepSchedule& schedule,
                         const SparsityConfig& sparsity) {
    cfg.validate();
    schedule.validate();
    const int64_t n = cfg.seq_len();
    if (sparsity.attn_k < 1 || sparsity.attn_k > n) {
        throw ValueError("attn_k " + std::to_string(sparsity.attn_k) + " outside [1, " +
                         std::to_string(n) + "]");
    }
    if (sparsity.mlp_k < 1 || sparsity.mlp_k > cfg.mlp_hidden) {
        throw ValueError("mlp_k " + std::to_string(sparsity.mlp_k) + " outside [1, " +
                         std::to_string(cfg.mlp_hidden) + "]");
    }

    const flops_t layers = u(cfg.layers);
    const flops_t attn_dense = dense_attention_flops(cfg);
    const flops_t attn_sparse = sparse_attention_flops(cfg, sparsity.attn_k);
    const flops_t mlp_dense = dense_mlp_flops(cfg);
    const flops_t mlp_sparse = sparse_mlp_flops(cfg, sparsity.mlp_k);

    const flops_t chunks = u(n / cfg.chunk);
    const flops_t colsum = 3 * u(cfg.batch) * u(cfg.heads) * u(n) * u(n);
    const flops_t topk = u(cfg.batch) * u(cfg.heads) * chunks * u(n);
    const flops_t cache_init = attn_sparse;
    const flops_t mlp_select = u(cfg.batch) * u(n) * u(cfg.model_dim) +
                               2 * u(cfg.batch) * chunks * u(cfg.model_dim) * u(cfg.mlp_hidden);

    // The selection/caching machinery only runs to serve sparse steps; an
    // all-dense schedule is the plain baseline.
    const bool has_sparse = schedule.count(StepMode::Sparse) > 0;

    FlopReport rep;
    for (StepMode m : schedule.modes) {
        rep.attn_dense_equiv += layers * attn_dense;
        rep.mlp_dense_equiv += layers * mlp_dense;
        switch (m) {
            case StepMode::Dense:
                rep.attn_actual += layers * attn_dense;
                rep.mlp_actual += layers * mlp_dense;
                if (has_sparse) {
                    rep.overhead_colsum += layers * colsum;
                    rep.overhead_topk += layers * topk;
                    rep.overhead_cache_init += layers * cache_init;
                    rep.overhead_mlp_select += layers * mlp_select;
                    rep.attn_actual += layers * (colsum + topk + cache_init);
                    rep.mlp_actual += layers * mlp_select;
                }
                break;
            case StepMode::Sparse:
                rep.attn_actual += layers * attn_sparse;
                rep.mlp_actual += layers * mlp_sparse;
                break;
            case StepMode::Skipped:
                break;
        }
    }
    return rep;
}

}  // namespace csd
