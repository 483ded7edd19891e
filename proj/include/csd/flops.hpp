#pragma once

#include <cstdint>
#include <string>

#include "csd/model.hpp"
#include "csd/schedule.hpp"

namespace csd {

using flops_t = unsigned __int128;

std::string flops_str(flops_t v);
double flops_double(flops_t v);

/// Analytic FLOP model over a resolved schedule, all exact integers.
/// Per layer-step:
///   dense attention            4*B*H*N^2*E
///   sparse attention           4*B*H*N*k*E
///   dense MLP                  4*B*N*D*F
///   sparse MLP                 4*B*N*D*k + 2*B*(N/c)*D*F   (change detection)
///   skipped                    0
/// Dense refresh steps additionally pay the selection machinery when the
/// schedule contains sparse steps: 3*B*H*N^2 for the column sums,
/// B*H*(N/c)*N for top-k scanning, 4*B*H*N*k*E for the cache-init sparse
/// pass, and B*N*D + 2*B*(N/c)*D*F for the MLP tile means. A schedule with no
/// sparse step is the dense baseline and pays none of it.
struct FlopReport {
    flops_t attn_actual = 0;
    flops_t attn_dense_equiv = 0;
    flops_t mlp_actual = 0;
    flops_t mlp_dense_equiv = 0;
    flops_t overhead_colsum = 0;
    flops_t overhead_topk = 0;
    flops_t overhead_cache_init = 0;
    flops_t overhead_mlp_select = 0;

    flops_t total_actual() const { return attn_actual + mlp_actual; }
    flops_t total_dense_equiv() const { return attn_dense_equiv + mlp_dense_equiv; }
    double ideal_speedup() const;
};

/// Per-step building blocks, exposed for tests and the bench tool.
flops_t dense_attention_flops(const ModelConfig& cfg);
flops_t sparse_attention_flops(const ModelConfig& cfg, int64_t k);
flops_t dense_mlp_flops(const ModelConfig& cfg);
flops_t sparse_mlp_flops(const ModelConfig& cfg, int64_t k);

FlopReport account_flops(const ModelConfig& cfg, const StepSchedule& schedule,
                         const SparsityConfig& sparsity);

}  // namespace csd
