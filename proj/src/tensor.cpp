#include "csd/tensor.hpp"

#include <cmath>
#include <sstream>

namespace csd {

namespace {

void check_shape_valid(const std::vector<int64_t>& shape) {
    for (int64_t d : shape) {
        if (d < 1) {
            throw ShapeError("invalid tensor shape " + shape_str(shape) +
                             ": all dimension sizes must be >= 1");
        }
    }
}

}  // namespace

std::string shape_str(const std::vector<int64_t>& shape) {
    std::ostringstream os;
    os << "[";
    for (size_t i = 0; i < shape.size(); ++i) {
        if (i) os << "x";
        os << shape[i];
    }
    os << "]";
    return os.str();
}

int64_t shape_numel(const std::vector<int64_t>& shape) {
    int64_t n = 1;
    for (int64_t d : shape) n *= d;
    return n;
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
    check_shape_valid(shape_);
    data_.assign(static_cast<size_t>(shape_numel(shape_)), 0.0f);
}

Tensor::Tensor(std::vector<int64_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    check_shape_valid(shape_);
    if (shape_numel(shape_) != static_cast<int64_t>(data_.size())) {
        throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                         " does not match shape " + shape_str(shape_));
    }
}

Tensor Tensor::full(std::vector<int64_t> shape, float value) {
    Tensor t(std::move(shape));
    for (auto& v : t.data_) v = value;
    return t;
}

int64_t Tensor::dim(int64_t i) const {
    if (i < 0 || i >= rank()) {
        throw ShapeError("dimension index " + std::to_string(i) + " out of range for shape " +
                         shape_str(shape_));
    }
    return shape_[static_cast<size_t>(i)];
}

Tensor gemm(const Tensor& a, const Tensor& b, bool transpose_b) {
    if (a.rank() != 2 || b.rank() != 2) {
        throw ShapeError("gemm expects rank-2 operands, got " + shape_str(a.shape()) + " and " +
                         shape_str(b.shape()));
    }
    const int64_t m = a.dim(0);
    const int64_t kk = a.dim(1);
    const int64_t b_inner = transpose_b ? b.dim(1) : b.dim(0);
    const int64_t n = transpose_b ? b.dim(0) : b.dim(1);
    if (kk != b_inner) {
        throw ShapeError("gemm inner dimensions disagree: " + shape_str(a.shape()) + " @ " +
                         shape_str(b.shape()) + (transpose_b ? " (b transposed)" : ""));
    }
    Tensor out({m, n});
    const float* pa = a.data();
    const float* pb = b.data();
    float* po = out.data();
    for (int64_t i = 0; i < m; ++i) {
        for (int64_t j = 0; j < n; ++j) {
            float acc = 0.0f;
            if (transpose_b) {
                const float* row_b = pb + j * kk;
                const float* row_a = pa + i * kk;
                for (int64_t k = 0; k < kk; ++k) acc += row_a[k] * row_b[k];
            } else {
                const float* row_a = pa + i * kk;
                for (int64_t k = 0; k < kk; ++k) acc += row_a[k] * pb[k * n + j];
            }
            po[i * n + j] = acc;
        }
    }
    return out;
}

SoftmaxResult softmax_rows(const Tensor& logits) {
    if (logits.rank() < 1) {
        throw ShapeError("softmax_rows expects rank >= 1, got scalar");
    }
    const int64_t row_len = logits.dim(logits.rank() - 1);
    const int64_t rows = logits.numel() / row_len;

    std::vector<int64_t> stat_shape(logits.shape().begin(), logits.shape().end() - 1);
    SoftmaxResult res;
    res.probs = Tensor(logits.shape());
    res.stats.row_max = Tensor(stat_shape);
    res.stats.exp_sum = Tensor(stat_shape);

    const float* in = logits.data();
    float* out = res.probs.data();
    float* pm = res.stats.row_max.data();
    float* pl = res.stats.exp_sum.data();

    for (int64_t r = 0; r < rows; ++r) {
        const float* row = in + r * row_len;
        float m = row[0];
        for (int64_t j = 0; j < row_len; ++j) {
            if (!std::isfinite(row[j])) {
                throw NumericError("softmax_rows: non-finite logit at row " + std::to_string(r) +
                                   ", position " + std::to_string(j));
            }
            m = std::max(m, row[j]);
        }
        float l = 0.0f;
        float* orow = out + r * row_len;
        for (int64_t j = 0; j < row_len; ++j) {
            orow[j] = std::exp(row[j] - m);
            l += orow[j];
        }
        for (int64_t j = 0; j < row_len; ++j) orow[j] /= l;
        pm[r] = m;
        pl[r] = l;
    }
    return res;
}

Tensor gelu(const Tensor& x) {
    static const float kSqrt2OverPi = std::sqrt(2.0f / static_cast<float>(M_PI));
    Tensor out(x.shape());
    const float* in = x.data();
    float* o = out.data();
    const int64_t n = x.numel();
    for (int64_t i = 0; i < n; ++i) {
        const float v = in[i];
        o[i] = 0.5f * v * (1.0f + std::tanh(kSqrt2OverPi * (v + 0.044715f * v * v * v)));
    }
    return out;
}

Tensor gather_rows(const Tensor& t, const std::vector<int64_t>& indices) {
    if (t.rank() < 2) {
        throw ShapeError("gather_rows expects rank >= 2, got " + shape_str(t.shape()));
    }
    const int64_t cols = t.dim(t.rank() - 1);
    const int64_t rows = t.dim(t.rank() - 2);
    const int64_t slices = t.numel() / (rows * cols);
    for (int64_t id : indices) {
        if (id < 0 || id >= rows) {
            throw IndexError("gather_rows: index " + std::to_string(id) + " out of range [0, " +
                             std::to_string(rows) + ")");
        }
    }
    std::vector<int64_t> out_shape = t.shape();
    out_shape[out_shape.size() - 2] = static_cast<int64_t>(indices.size());
    if (indices.empty()) {
        throw ShapeError("gather_rows: empty index list");
    }
    Tensor out(out_shape);
    const float* in = t.data();
    float* o = out.data();
    const int64_t out_rows = static_cast<int64_t>(indices.size());
    for (int64_t s = 0; s < slices; ++s) {
        const float* src = in + s * rows * cols;
        float* dst = o + s * out_rows * cols;
        for (int64_t j = 0; j < out_rows; ++j) {
            const float* r = src + indices[static_cast<size_t>(j)] * cols;
            float* w = dst + j * cols;
            for (int64_t cidx = 0; cidx < cols; ++cidx) w[cidx] = r[cidx];
        }
    }
    return out;
}

Tensor chunk_reduce(const Tensor& t, int64_t chunk, ReduceMode mode) {
    if (t.rank() < 2) {
        throw ShapeError("chunk_reduce expects rank >= 2, got " + shape_str(t.shape()));
    }
    if (chunk < 1) {
        throw ValueError("chunk_reduce: chunk must be >= 1, got " + std::to_string(chunk));
    }
    const int64_t cols = t.dim(t.rank() - 1);
    const int64_t rows = t.dim(t.rank() - 2);
    if (rows % chunk != 0) {
        throw ShapeError("chunk_reduce: row count " + std::to_string(rows) +
                         " not divisible by chunk " + std::to_string(chunk));
    }
    const int64_t out_rows = rows / chunk;
    const int64_t slices = t.numel() / (rows * cols);
    std::vector<int64_t> out_shape = t.shape();
    out_shape[out_shape.size() - 2] = out_rows;
    Tensor out(out_shape);
    const float* in = t.data();
    float* o = out.data();
    const float inv = 1.0f / static_cast<float>(chunk);
    for (int64_t s = 0; s < slices; ++s) {
        const float* src = in + s * rows * cols;
        float* dst = o + s * out_rows * cols;
        for (int64_t i = 0; i < out_rows; ++i) {
            float* w = dst + i * cols;
            for (int64_t cidx = 0; cidx < cols; ++cidx) w[cidx] = 0.0f;
            for (int64_t r = i * chunk; r < (i + 1) * chunk; ++r) {
                const float* row = src + r * cols;
                for (int64_t cidx = 0; cidx < cols; ++cidx) w[cidx] += row[cidx];
            }
            if (mode == ReduceMode::Mean) {
                for (int64_t cidx = 0; cidx < cols; ++cidx) w[cidx] *= inv;
            }
        }
    }
    return out;
}

}  // namespace csd
