#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csd/error.hpp"

namespace csd {

/// Dense row-major float32 tensor with explicit shape metadata.
/// Invariants: every dimension size >= 1 and product(shape) == data size.
/// A rank-0 tensor is a scalar holding one element.
class Tensor {
public:
    Tensor() : shape_(), data_(1, 0.0f) {}
    explicit Tensor(std::vector<int64_t> shape);
    Tensor(std::vector<int64_t> shape, std::vector<float> data);

    static Tensor zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }
    static Tensor full(std::vector<int64_t> shape, float value);

    const std::vector<int64_t>& shape() const { return shape_; }
    int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
    int64_t dim(int64_t i) const;
    int64_t numel() const { return static_cast<int64_t>(data_.size()); }

    float* data() { return data_.data(); }
    const float* data() const { return data_.data(); }
    float& operator[](int64_t flat) { return data_[static_cast<size_t>(flat)]; }
    float operator[](int64_t flat) const { return data_[static_cast<size_t>(flat)]; }

    const std::vector<float>& values() const { return data_; }

private:
    std::vector<int64_t> shape_;
    std::vector<float> data_;
};

std::string shape_str(const std::vector<int64_t>& shape);
int64_t shape_numel(const std::vector<int64_t>& shape);

/// Row max (m) and exp-sum (l) captured by softmax_rows; one entry per row,
/// shaped like the input minus its last dimension.
struct SoftmaxStats {
    Tensor row_max;
    Tensor exp_sum;
};

struct SoftmaxResult {
    Tensor probs;
    SoftmaxStats stats;
};

enum class ReduceMode { Sum, Mean };

/// Exact dense matrix product, f32 accumulation. a is [M x K]; b is [K x N],
/// or [N x K] when transpose_b is set. No broadcasting.
Tensor gemm(const Tensor& a, const Tensor& b, bool transpose_b = false);

/// Numerically stable softmax over the last dimension. Also returns the
/// per-row max and exp-sum so later steps can reuse them as normalization
/// constants. Rejects non-finite input.
SoftmaxResult softmax_rows(const Tensor& logits);

/// Element-wise tanh-approximation GELU:
/// 0.5*x*(1 + tanh(sqrt(2/pi)*(x + 0.044715*x^3))).
Tensor gelu(const Tensor& x);

/// Gathers rows along the second-to-last axis. The same index list is applied
/// to every leading slice; duplicates allowed, order preserved.
Tensor gather_rows(const Tensor& t, const std::vector<int64_t>& indices);

/// Reduces groups of `chunk` consecutive rows (second-to-last axis) by sum or
/// mean: [... x N x F] -> [... x N/chunk x F]. N must divide by chunk.
Tensor chunk_reduce(const Tensor& t, int64_t chunk, ReduceMode mode);

}  // namespace csd
