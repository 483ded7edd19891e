#include "csd/attention.hpp"

#include <cmath>
#include <string>

namespace csd {

namespace {

void check_qkv(const Tensor& q, const Tensor& k, const Tensor& v) {
    if (q.rank() != 4 || k.rank() != 4 || v.rank() != 4) {
        throw ShapeError("attention expects [B x H x N x E] tensors, got q=" +
                         shape_str(q.shape()) + " k=" + shape_str(k.shape()) +
                         " v=" + shape_str(v.shape()));
    }
    if (q.shape() != k.shape() || q.shape() != v.shape()) {
        throw ShapeError("attention q/k/v shapes disagree: q=" + shape_str(q.shape()) +
                         " k=" + shape_str(k.shape()) + " v=" + shape_str(v.shape()));
    }
}

Tensor slice_bh(const Tensor& t, int64_t b, int64_t h) {
    const int64_t n = t.dim(2);
    const int64_t e = t.dim(3);
    const float* src = t.data() + ((b * t.dim(1) + h) * n) * e;
    std::vector<float> data(src, src + n * e);
    return Tensor({n, e}, std::move(data));
}

void write_bh(Tensor& dst, int64_t b, int64_t h, const Tensor& slice) {
    const int64_t n = dst.dim(2);
    const int64_t e = dst.dim(3);
    float* out = dst.data() + ((b * dst.dim(1) + h) * n) * e;
    const float* in = slice.data();
    for (int64_t i = 0; i < n * e; ++i) out[i] = in[i];
}

Tensor scaled_logits(const Tensor& q_bh, const Tensor& k_bh) {
    Tensor logits = gemm(q_bh, k_bh, /*transpose_b=*/true);
    const float scale = 1.0f / std::sqrt(static_cast<float>(q_bh.dim(1)));
    float* p = logits.data();
    for (int64_t i = 0; i < logits.numel(); ++i) p[i] *= scale;
    return logits;
}

void check_index_set(const SparseIndexSet& idx, const Tensor& q, int64_t n) {
    if (idx.batch != q.dim(0) || idx.heads != q.dim(1)) {
        throw ShapeError("sparse index set dims (" + std::to_string(idx.batch) + "," +
                         std::to_string(idx.heads) + ") do not match q " + shape_str(q.shape()));
    }
    if (idx.domain != n || idx.chunks * idx.chunk_size != n) {
        throw ShapeError("sparse index set chunking does not cover the sequence length " +
                         std::to_string(n));
    }
}

}  // namespace

Tensor dense_attention(const Tensor& q, const Tensor& k, const Tensor& v) {
    check_qkv(q, k, v);
    const int64_t batch = q.dim(0);
    const int64_t heads = q.dim(1);
    Tensor out(q.shape());
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t h = 0; h < heads; ++h) {
            const Tensor q_bh = slice_bh(q, b, h);
            const Tensor k_bh = slice_bh(k, b, h);
            const Tensor v_bh = slice_bh(v, b, h);
            const auto sm = softmax_rows(scaled_logits(q_bh, k_bh));
            write_bh(out, b, h, gemm(sm.probs, v_bh));
        }
    }
    return out;
}

ColumnSumAttentionResult column_sum_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                              const SoftmaxStats* prev_stats, int64_t chunk) {
    check_qkv(q, k, v);
    const int64_t batch = q.dim(0);
    const int64_t heads = q.dim(1);
    const int64_t n = q.dim(2);
    if (chunk < 1 || n % chunk != 0) {
        throw ShapeError("column_sum_attention: sequence length " + std::to_string(n) +
                         " not divisible by chunk " + std::to_string(chunk));
    }
    if (prev_stats != nullptr) {
        const std::vector<int64_t> want{batch, heads, n};
        if (prev_stats->row_max.shape() != want || prev_stats->exp_sum.shape() != want) {
            throw ShapeError("column_sum_attention: previous stats shape " +
                             shape_str(prev_stats->row_max.shape()) + " does not match " +
                             shape_str(want));
        }
    }

    ColumnSumAttentionResult res;
    res.output = Tensor(q.shape());
    res.column_sums = Tensor({batch, heads, n / chunk, n});
    res.stats.row_max = Tensor({batch, heads, n});
    res.stats.exp_sum = Tensor({batch, heads, n});

    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t h = 0; h < heads; ++h) {
            const Tensor q_bh = slice_bh(q, b, h);
            const Tensor k_bh = slice_bh(k, b, h);
            const Tensor v_bh = slice_bh(v, b, h);
            const Tensor logits = scaled_logits(q_bh, k_bh);
            const auto sm = softmax_rows(logits);
            write_bh(res.output, b, h, gemm(sm.probs, v_bh));

            float* stat_m = res.stats.row_max.data() + (b * heads + h) * n;
            float* stat_l = res.stats.exp_sum.data() + (b * heads + h) * n;
            const float* fresh_m = sm.stats.row_max.data();
            const float* fresh_l = sm.stats.exp_sum.data();
            for (int64_t i = 0; i < n; ++i) {
                stat_m[i] = fresh_m[i];
                stat_l[i] = fresh_l[i];
            }

            // Approximate probabilities normalized with the previous step's
            // constants (fresh ones on the first dense step), then chunk-sum
            // over query rows.
            const float* use_m = fresh_m;
            const float* use_l = fresh_l;
            if (prev_stats != nullptr) {
                use_m = prev_stats->row_max.data() + (b * heads + h) * n;
                use_l = prev_stats->exp_sum.data() + (b * heads + h) * n;
            }
            Tensor p_approx({n, n});
            const float* lg = logits.data();
            float* pa = p_approx.data();
            for (int64_t i = 0; i < n; ++i) {
                const float m = use_m[i];
                const float l = use_l[i];
                for (int64_t j = 0; j < n; ++j) {
                    pa[i * n + j] = std::exp(lg[i * n + j] - m) / l;
                }
            }
            const Tensor sums = chunk_reduce(p_approx, chunk, ReduceMode::Sum);
            float* dst = res.column_sums.data() + ((b * heads + h) * (n / chunk)) * n;
            const float* src = sums.data();
            for (int64_t i = 0; i < (n / chunk) * n; ++i) dst[i] = src[i];
        }
    }
    return res;
}

Tensor sparse_delta_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                              const SparseIndexSet& indices, const Tensor& base, float scale) {
    check_qkv(q, k, v);
    if (base.shape() != q.shape()) {
        throw ShapeError("sparse_delta_attention: base shape " + shape_str(base.shape()) +
                         " does not match q " + shape_str(q.shape()));
    }
    const int64_t batch = q.dim(0);
    const int64_t heads = q.dim(1);
    const int64_t n = q.dim(2);
    const int64_t e = q.dim(3);
    check_index_set(indices, q, n);
    indices.validate();
    const int64_t chunk = indices.chunk_size;

    Tensor out = base;
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t h = 0; h < heads; ++h) {
            const Tensor k_bh = slice_bh(k, b, h);
            const Tensor v_bh = slice_bh(v, b, h);
            for (int64_t c = 0; c < indices.chunks; ++c) {
                const int32_t cnt = indices.count(b, h, c);
                if (cnt == 0) continue;
                const int32_t* ids = indices.chunk_indices(b, h, c);
                std::vector<int64_t> rows(ids, ids + cnt);
                const Tensor k_sel = gather_rows(k_bh, rows);
                const Tensor v_sel = gather_rows(v_bh, rows);

                const float* qs = q.data() + (((b * heads + h) * n) + c * chunk) * e;
                std::vector<float> q_data(qs, qs + chunk * e);
                const Tensor q_chunk({chunk, e}, std::move(q_data));

                Tensor logits = gemm(q_chunk, k_sel, /*transpose_b=*/true);
                const float inv_sqrt_e = 1.0f / std::sqrt(static_cast<float>(e));
                float* lp = logits.data();
                for (int64_t i = 0; i < logits.numel(); ++i) lp[i] *= inv_sqrt_e;

                const auto sm = softmax_rows(logits);
                const Tensor delta = gemm(sm.probs, v_sel);

                float* dst = out.data() + (((b * heads + h) * n) + c * chunk) * e;
                const float* dp = delta.data();
                for (int64_t i = 0; i < chunk * e; ++i) dst[i] += scale * dp[i];
            }
        }
    }
    return out;
}

Tensor attention_step(const Tensor& q, const Tensor& k, const Tensor& v, AttentionCache& cache,
                      bool dense_step, int64_t top_k, int64_t chunk,
                      const SparseIndexSet* static_indices) {
    if (!dense_step && !cache.initialized) {
        throw StateError("sparse attention step requested before any dense step");
    }
    if (dense_step) {
        const SoftmaxStats* prev = cache.initialized ? &cache.stats : nullptr;
        auto res = column_sum_attention(q, k, v, prev, chunk);
        SparseIndexSet idx = static_indices != nullptr
                                 ? *static_indices
                                 : select_top_k(res.column_sums, top_k, chunk);
        check_index_set(idx, q, q.dim(2));
        idx.validate();
        cache.residual_output = sparse_delta_attention(q, k, v, idx, res.output, -1.0f);
        cache.stats = std::move(res.stats);
        cache.indices = std::move(idx);
        cache.age = 0;
        cache.initialized = true;
        return res.output;
    }
    cache.age += 1;
    return sparse_delta_attention(q, k, v, cache.indices, cache.residual_output, 1.0f);
}

}  // namespace csd
