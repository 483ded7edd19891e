#include "csd/model.hpp"

#include <cmath>
#include <string>

#include "csd/rng.hpp"

namespace csd {

void ModelConfig::validate() const {
    if (batch < 1 || grid_t < 1 || grid_h < 1 || grid_w < 1 || model_dim < 1 || head_dim < 1 ||
        heads < 1 || mlp_hidden < 1 || layers < 0 || chunk < 1) {
        throw ConfigError("model config fields must be positive (layers may be 0)");
    }
    if (model_dim != heads * head_dim) {
        throw ConfigError("model_dim " + std::to_string(model_dim) + " != heads*head_dim " +
                          std::to_string(heads * head_dim));
    }
    if (seq_len() % chunk != 0) {
        throw ConfigError("sequence length " + std::to_string(seq_len()) +
                          " not divisible by chunk " + std::to_string(chunk));
    }
    if (voxel_t * voxel_h * voxel_w != chunk) {
        throw ConfigError("voxel volume " + std::to_string(voxel_t * voxel_h * voxel_w) +
                          " must equal chunk " + std::to_string(chunk));
    }
    voxel_layout().validate();
}

namespace {

Tensor gaussian(GaussianRng& rng, std::vector<int64_t> shape, float stddev) {
    Tensor t(std::move(shape));
    float* p = t.data();
    for (int64_t i = 0; i < t.numel(); ++i) p[i] = rng.next(0.0f, stddev);
    return t;
}

Tensor slice_b(const Tensor& t, int64_t b) {
    const int64_t rows = t.dim(1);
    const int64_t cols = t.dim(2);
    const float* src = t.data() + b * rows * cols;
    std::vector<float> data(src, src + rows * cols);
    return Tensor({rows, cols}, std::move(data));
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw ShapeError("residual add shapes disagree: " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
    }
    Tensor out = a;
    float* o = out.data();
    const float* p = b.data();
    for (int64_t i = 0; i < out.numel(); ++i) o[i] += p[i];
    return out;
}

struct HeadProjections {
    Tensor q, k, v;  // [B x heads x N x E]
};

HeadProjections project_qkv(const LayerWeights& lw, const Tensor& x, int64_t heads,
                            int64_t head_dim) {
    HeadProjections hp;
    hp.q = split_heads(project(x, lw.wq), heads, head_dim);
    hp.k = split_heads(project(x, lw.wk), heads, head_dim);
    hp.v = split_heads(project(x, lw.wv), heads, head_dim);
    return hp;
}

}  // namespace

// Output projections start at half gain so the residual branches stay small
// and multi-step latent trajectories evolve slowly instead of compounding
// into chaos; at full gain the 20-step runs blow past 20x the input norm.
constexpr float kResidualBranchScale = 0.5f;

ToyModel build_toy_model(const ModelConfig& cfg) {
    cfg.validate();
    ToyModel model;
    model.cfg = cfg;
    GaussianRng rng(cfg.seed);
    const float std_w = 1.0f / std::sqrt(static_cast<float>(cfg.model_dim));
    const float std_out = std_w * kResidualBranchScale;
    for (int64_t l = 0; l < cfg.layers; ++l) {
        LayerWeights lw;
        lw.wq = gaussian(rng, {cfg.model_dim, cfg.model_dim}, std_w);
        lw.wk = gaussian(rng, {cfg.model_dim, cfg.model_dim}, std_w);
        lw.wv = gaussian(rng, {cfg.model_dim, cfg.model_dim}, std_w);
        lw.wo = gaussian(rng, {cfg.model_dim, cfg.model_dim}, std_out);
        lw.mlp.w1 = gaussian(rng, {cfg.mlp_hidden, cfg.model_dim}, std_w);
        lw.mlp.b1 = gaussian(rng, {cfg.mlp_hidden}, std_w);
        lw.mlp.w2 = gaussian(rng, {cfg.mlp_hidden, cfg.model_dim}, std_out);
        lw.mlp.b2 = gaussian(rng, {cfg.model_dim}, std_out);
        model.layers.push_back(std::move(lw));
    }
    return model;
}

ModelState make_state(const ToyModel& model) {
    ModelState st;
    st.layers.resize(model.layers.size());
    return st;
}

Tensor project(const Tensor& x, const Tensor& w) {
    if (x.rank() != 3) {
        throw ShapeError("project expects [B x N x D] input, got " + shape_str(x.shape()));
    }
    const int64_t batch = x.dim(0);
    Tensor out({batch, x.dim(1), w.dim(1)});
    for (int64_t b = 0; b < batch; ++b) {
        const Tensor o = gemm(slice_b(x, b), w);
        float* dst = out.data() + b * o.numel();
        const float* src = o.data();
        for (int64_t i = 0; i < o.numel(); ++i) dst[i] = src[i];
    }
    return out;
}

Tensor split_heads(const Tensor& x, int64_t heads, int64_t head_dim) {
    if (x.rank() != 3 || x.dim(2) != heads * head_dim) {
        throw ShapeError("split_heads: input " + shape_str(x.shape()) + " does not factor into " +
                         std::to_string(heads) + " heads of dim " + std::to_string(head_dim));
    }
    const int64_t batch = x.dim(0);
    const int64_t n = x.dim(1);
    Tensor out({batch, heads, n, head_dim});
    const float* in = x.data();
    float* o = out.data();
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t t = 0; t < n; ++t) {
            for (int64_t h = 0; h < heads; ++h) {
                const float* src = in + ((b * n + t) * heads + h) * head_dim;
                float* dst = o + (((b * heads + h) * n) + t) * head_dim;
                for (int64_t e = 0; e < head_dim; ++e) dst[e] = src[e];
            }
        }
    }
    return out;
}

Tensor merge_heads(const Tensor& x) {
    if (x.rank() != 4) {
        throw ShapeError("merge_heads expects [B x H x N x E], got " + shape_str(x.shape()));
    }
    const int64_t batch = x.dim(0);
    const int64_t heads = x.dim(1);
    const int64_t n = x.dim(2);
    const int64_t head_dim = x.dim(3);
    Tensor out({batch, n, heads * head_dim});
    const float* in = x.data();
    float* o = out.data();
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t h = 0; h < heads; ++h) {
            for (int64_t t = 0; t < n; ++t) {
                const float* src = in + (((b * heads + h) * n) + t) * head_dim;
                float* dst = o + ((b * n + t) * heads + h) * head_dim;
                for (int64_t e = 0; e < head_dim; ++e) dst[e] = src[e];
            }
        }
    }
    return out;
}

Tensor model_forward_dense(const ToyModel& model, const Tensor& x) {
    Tensor cur = x;
    for (const auto& lw : model.layers) {
        const auto hp = project_qkv(lw, cur, model.cfg.heads, model.cfg.head_dim);
        const Tensor attn = dense_attention(hp.q, hp.k, hp.v);
        cur = add(cur, project(merge_heads(attn), lw.wo));
        cur = add(cur, dense_mlp(cur, lw.mlp).output);
    }
    return cur;
}

Tensor model_forward_step(const ToyModel& model, ModelState& state, const Tensor& x,
                          bool dense_step, const SparsityConfig& sparsity, LayerProbe* probe,
                          const SparseIndexSet* static_attn) {
    if (state.layers.size() != model.layers.size()) {
        throw StateError("model state layer count does not match the model");
    }
    Tensor cur = x;
    for (size_t l = 0; l < model.layers.size(); ++l) {
        const auto& lw = model.layers[l];
        LayerState& ls = state.layers[l];

        const auto hp = project_qkv(lw, cur, model.cfg.heads, model.cfg.head_dim);
        const Tensor attn_out = attention_step(hp.q, hp.k, hp.v, ls.attn, dense_step,
                                               sparsity.attn_k, model.cfg.chunk, static_attn);
        if (probe != nullptr) {
            if (dense_step) {
                probe->attention_sample(static_cast<int64_t>(l), true, attn_out, attn_out);
            } else {
                probe->attention_sample(static_cast<int64_t>(l), false,
                                        dense_attention(hp.q, hp.k, hp.v), attn_out);
            }
        }
        cur = add(cur, project(merge_heads(attn_out), lw.wo));

        const Tensor mlp_in = cur;
        const Tensor mlp_out =
            mlp_step(mlp_in, lw.mlp, ls.mlp, dense_step, sparsity.mlp_k, model.cfg.chunk);
        if (probe != nullptr) {
            if (dense_step) {
                probe->mlp_sample(static_cast<int64_t>(l), true, mlp_out, mlp_out);
            } else {
                probe->mlp_sample(static_cast<int64_t>(l), false, dense_mlp(mlp_in, lw.mlp).output,
                                  mlp_out);
            }
        }
        cur = add(cur, mlp_out);
    }
    return cur;
}

}  // namespace csd
