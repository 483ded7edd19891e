#include "csd/mlp.hpp"

#include <cmath>
#include <string>

namespace csd {

namespace {

Tensor slice_b(const Tensor& t, int64_t b) {
    const int64_t rows = t.dim(1);
    const int64_t cols = t.dim(2);
    const float* src = t.data() + b * rows * cols;
    std::vector<float> data(src, src + rows * cols);
    return Tensor({rows, cols}, std::move(data));
}

void write_b(Tensor& dst, int64_t b, const Tensor& slice) {
    const int64_t rows = dst.dim(1);
    const int64_t cols = dst.dim(2);
    float* out = dst.data() + b * rows * cols;
    const float* in = slice.data();
    for (int64_t i = 0; i < rows * cols; ++i) out[i] = in[i];
}

void check_x(const Tensor& x, const MlpWeights& w) {
    if (x.rank() != 3) {
        throw ShapeError("mlp expects [B x N x D] input, got " + shape_str(x.shape()));
    }
    if (x.dim(2) != w.model_dim()) {
        throw ShapeError("mlp input dim " + std::to_string(x.dim(2)) +
                         " does not match weights' model dim " + std::to_string(w.model_dim()));
    }
}

}  // namespace

void MlpWeights::validate() const {
    if (w1.rank() != 2 || w2.rank() != 2 || b1.rank() != 1 || b2.rank() != 1) {
        throw ShapeError("mlp weights must be w1 [F x D], b1 [F], w2 [F x D], b2 [D]");
    }
    if (w2.shape() != w1.shape() || b1.dim(0) != w1.dim(0) || b2.dim(0) != w1.dim(1)) {
        throw ShapeError("mlp weight shapes disagree: w1=" + shape_str(w1.shape()) +
                         " b1=" + shape_str(b1.shape()) + " w2=" + shape_str(w2.shape()) +
                         " b2=" + shape_str(b2.shape()));
    }
}

MlpDenseResult dense_mlp(const Tensor& x, const MlpWeights& w) {
    w.validate();
    check_x(x, w);
    const int64_t batch = x.dim(0);
    const int64_t n = x.dim(1);
    const int64_t hidden = w.hidden();
    const int64_t d = w.model_dim();

    MlpDenseResult res;
    res.preact = Tensor({batch, n, hidden});
    res.act = Tensor({batch, n, hidden});
    res.output = Tensor({batch, n, d});
    const float* b1 = w.b1.data();
    const float* b2 = w.b2.data();

    for (int64_t b = 0; b < batch; ++b) {
        Tensor pre = gemm(slice_b(x, b), w.w1, /*transpose_b=*/true);
        float* pp = pre.data();
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t f = 0; f < hidden; ++f) pp[i * hidden + f] += b1[f];
        }
        const Tensor act = gelu(pre);
        Tensor out = gemm(act, w.w2);
        float* op = out.data();
        for (int64_t i = 0; i < n; ++i) {
            for (int64_t j = 0; j < d; ++j) op[i * d + j] += b2[j];
        }
        write_b(res.preact, b, pre);
        write_b(res.act, b, act);
        write_b(res.output, b, out);
    }
    return res;
}

Tensor mlp_tile_means(const Tensor& x, const Tensor& w1, int64_t chunk) {
    if (x.rank() != 3) {
        throw ShapeError("mlp_tile_means expects [B x N x D] input, got " + shape_str(x.shape()));
    }
    const Tensor means = chunk_reduce(x, chunk, ReduceMode::Mean);  // [B x N/c x D]
    const int64_t batch = x.dim(0);
    const int64_t chunks = means.dim(1);
    const int64_t hidden = w1.dim(0);
    Tensor out({batch, chunks, hidden});
    for (int64_t b = 0; b < batch; ++b) {
        write_b(out, b, gemm(slice_b(means, b), w1, /*transpose_b=*/true));
    }
    return out;
}

SparseIndexSet mlp_change_indices(const Tensor& x, const Tensor& w1, const Tensor& tile_means,
                                  int64_t k, int64_t chunk) {
    const Tensor fresh = mlp_tile_means(x, w1, chunk);
    if (fresh.shape() != tile_means.shape()) {
        throw ShapeError("mlp_change_indices: cached tile means " + shape_str(tile_means.shape()) +
                         " do not match fresh " + shape_str(fresh.shape()));
    }
    const int64_t hidden = w1.dim(0);
    if (k < 1 || k > hidden) {
        throw ValueError("mlp_change_indices: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(hidden) + "]");
    }
    const int64_t batch = fresh.dim(0);
    const int64_t chunks = fresh.dim(1);
    Tensor delta({batch, 1, chunks, hidden});
    const float* a = fresh.data();
    const float* b = tile_means.data();
    float* dp = delta.data();
    for (int64_t i = 0; i < fresh.numel(); ++i) dp[i] = std::fabs(a[i] - b[i]);
    return select_top_k(delta, k, chunk);
}

Tensor sparse_delta_mlp(const Tensor& x, const MlpWeights& w, const SparseIndexSet& indices,
                        MlpCache& cache) {
    w.validate();
    check_x(x, w);
    if (!cache.initialized) {
        throw StateError("sparse MLP step requested before any dense step");
    }
    const int64_t batch = x.dim(0);
    const int64_t n = x.dim(1);
    const int64_t d = w.model_dim();
    const int64_t hidden = w.hidden();
    if (indices.batch != batch || indices.heads != 1 || indices.domain != hidden ||
        indices.chunks * indices.chunk_size != n) {
        throw ShapeError("mlp sparse index set does not match (B=" + std::to_string(batch) +
                         ", N=" + std::to_string(n) + ", F=" + std::to_string(hidden) + ")");
    }
    indices.validate();
    const int64_t chunk = indices.chunk_size;
    const float* b1 = w.b1.data();

    Tensor out = cache.outputs;
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t c = 0; c < indices.chunks; ++c) {
            const int32_t cnt = indices.count(b, 0, c);
            if (cnt == 0) continue;
            const int32_t* ids = indices.chunk_indices(b, 0, c);
            std::vector<int64_t> neurons(ids, ids + cnt);

            const float* xs = x.data() + (b * n + c * chunk) * d;
            std::vector<float> x_data(xs, xs + chunk * d);
            const Tensor x_chunk({chunk, d}, std::move(x_data));

            const Tensor w1_sel = gather_rows(w.w1, neurons);
            Tensor pre = gemm(x_chunk, w1_sel, /*transpose_b=*/true);  // [c x cnt]
            float* pp = pre.data();
            for (int64_t r = 0; r < chunk; ++r) {
                for (int32_t j = 0; j < cnt; ++j) pp[r * cnt + j] += b1[neurons[j]];
            }
            const Tensor fresh = gelu(pre);

            // delta against the cached activations, which then get replaced.
            Tensor delta({chunk, static_cast<int64_t>(cnt)});
            float* dlt = delta.data();
            const float* fa = fresh.data();
            float* cache_act = cache.activations.data() + (b * n + c * chunk) * hidden;
            for (int64_t r = 0; r < chunk; ++r) {
                for (int32_t j = 0; j < cnt; ++j) {
                    float& cached = cache_act[r * hidden + neurons[j]];
                    dlt[r * cnt + j] = fa[r * cnt + j] - cached;
                    cached = fa[r * cnt + j];
                }
            }

            const Tensor w2_sel = gather_rows(w.w2, neurons);
            const Tensor contrib = gemm(delta, w2_sel);  // [c x D]
            float* dst = out.data() + (b * n + c * chunk) * d;
            const float* cp = contrib.data();
            for (int64_t i = 0; i < chunk * d; ++i) dst[i] += cp[i];
        }
    }
    cache.outputs = out;
    return out;
}

Tensor mlp_step(const Tensor& x, const MlpWeights& w, MlpCache& cache, bool dense_step,
                int64_t top_k, int64_t chunk) {
    if (!dense_step && !cache.initialized) {
        throw StateError("sparse MLP step requested before any dense step");
    }
    if (x.rank() != 3) {
        throw ShapeError("mlp_step expects [B x N x D] input, got " + shape_str(x.shape()));
    }
    if (chunk < 1 || x.dim(1) % chunk != 0) {
        throw ShapeError("mlp_step: sequence length " + std::to_string(x.dim(1)) +
                         " not divisible by chunk " + std::to_string(chunk));
    }
    if (dense_step) {
        auto res = dense_mlp(x, w);
        cache.tile_means = mlp_tile_means(x, w.w1, chunk);
        cache.activations = std::move(res.act);
        cache.outputs = res.output;
        cache.indices = SparseIndexSet{};
        cache.age = 0;
        cache.initialized = true;
        return res.output;
    }
    SparseIndexSet idx = mlp_change_indices(x, w.w1, cache.tile_means, top_k, chunk);
    cache.age += 1;
    Tensor out = sparse_delta_mlp(x, w, idx, cache);
    cache.indices = std::move(idx);
    return out;
}

}  // namespace csd
