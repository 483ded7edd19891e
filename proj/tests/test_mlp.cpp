#include <cmath>
#include <iostream>
#include <numeric>
#include <vector>

#include "csd/metrics.hpp"
#include "csd/mlp.hpp"
#include "test_util.hpp"

using namespace csd;

namespace {

double gelu64(double x) {
    return 0.5 * x * (1.0 + std::tanh(std::sqrt(2.0 / M_PI) * (x + 0.044715 * x * x * x)));
}

MlpWeights random_weights(int64_t hidden, int64_t d, uint64_t seed) {
    MlpWeights w;
    w.w1 = random_tensor({hidden, d}, seed);
    w.b1 = random_tensor({hidden}, seed + 1, 0.5f);
    w.w2 = random_tensor({hidden, d}, seed + 2);
    w.b2 = random_tensor({d}, seed + 3, 0.5f);
    return w;
}

// 64-bit two-gemm oracle.
std::vector<double> dense_mlp_oracle(const Tensor& x, const MlpWeights& w) {
    const int64_t batch = x.dim(0), n = x.dim(1), d = x.dim(2), hidden = w.hidden();
    std::vector<double> out(static_cast<size_t>(batch * n * d), 0.0);
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t i = 0; i < n; ++i) {
            std::vector<double> act(static_cast<size_t>(hidden), 0.0);
            for (int64_t f = 0; f < hidden; ++f) {
                double pre = static_cast<double>(w.b1[f]);
                for (int64_t k = 0; k < d; ++k) {
                    pre += static_cast<double>(x[(b * n + i) * d + k]) * w.w1[f * d + k];
                }
                act[static_cast<size_t>(f)] = gelu64(pre);
            }
            for (int64_t j = 0; j < d; ++j) {
                double acc = static_cast<double>(w.b2[j]);
                for (int64_t f = 0; f < hidden; ++f) {
                    acc += act[static_cast<size_t>(f)] * w.w2[f * d + j];
                }
                out[static_cast<size_t>((b * n + i) * d + j)] = acc;
            }
        }
    }
    return out;
}

void test_dense_mlp() {
    // zero input with zero biases stays zero
    {
        MlpWeights w = random_weights(5, 3, 1);
        w.b1 = Tensor({5});
        w.b2 = Tensor({3});
        const auto res = dense_mlp(Tensor({1, 2, 3}), w);
        for (int64_t i = 0; i < res.output.numel(); ++i) CHECK(res.output[i] == 0.0f);
    }

    // scalar case vs hand arithmetic
    {
        MlpWeights w;
        w.w1 = Tensor({1, 1}, {0.7f});
        w.b1 = Tensor({1}, {0.2f});
        w.w2 = Tensor({1, 1}, {-1.3f});
        w.b2 = Tensor({1}, {0.05f});
        const Tensor x({1, 1, 1}, {0.9f});
        const auto res = dense_mlp(x, w);
        const double want = gelu64(0.9 * 0.7 + 0.2) * -1.3 + 0.05;
        CHECK_CLOSE(res.output[0], want, 1e-6);
    }

    // random B=1, N=4, D=3, F=5 vs the 64-bit oracle
    {
        const MlpWeights w = random_weights(5, 3, 7);
        const Tensor x = random_tensor({1, 4, 3}, 8);
        const auto res = dense_mlp(x, w);
        const auto want = dense_mlp_oracle(x, w);
        for (int64_t i = 0; i < res.output.numel(); ++i) {
            CHECK_CLOSE(res.output[i], want[static_cast<size_t>(i)], 1e-5);
        }
        // act/preact plumbing is consistent
        for (int64_t i = 0; i < res.preact.numel(); ++i) {
            CHECK_CLOSE(res.act[i], gelu64(res.preact[i]), 1e-5);
        }
    }

    CHECK_THROWS(ShapeError, dense_mlp(random_tensor({1, 2, 4}, 1), random_weights(5, 3, 2)));
}

void test_linearity_consistency() {
    // chunk_mean(x @ w1^T) == chunk_mean(x) @ w1^T within 1e-4 relative
    const Tensor x = random_tensor({2, 8, 6}, 11);
    const Tensor w1 = random_tensor({10, 6}, 12);
    const Tensor via_means = mlp_tile_means(x, w1, 4);

    Tensor pre({2, 8, 10});
    for (int64_t b = 0; b < 2; ++b) {
        for (int64_t i = 0; i < 8; ++i) {
            for (int64_t f = 0; f < 10; ++f) {
                float acc = 0.0f;
                for (int64_t k = 0; k < 6; ++k) acc += x[(b * 8 + i) * 6 + k] * w1[f * 6 + k];
                pre[(b * 8 + i) * 10 + f] = acc;
            }
        }
    }
    const Tensor via_pre = chunk_reduce(pre, 4, ReduceMode::Mean);
    for (int64_t i = 0; i < via_means.numel(); ++i) {
        const double denom = std::max(1.0, std::fabs(static_cast<double>(via_pre[i])));
        CHECK(std::fabs(static_cast<double>(via_means[i]) - via_pre[i]) / denom <= 1e-4);
    }
}

void test_change_indices() {
    const int64_t d = 3, hidden = 6, chunk = 2;
    const Tensor w1 = random_tensor({hidden, d}, 20);
    const Tensor x = random_tensor({1, 4, d}, 21);
    const Tensor fresh = mlp_tile_means(x, w1, chunk);

    // unchanged input: zero delta everywhere, ties resolve to the lowest ids
    {
        auto idx = mlp_change_indices(x, w1, fresh, 3, chunk);
        for (int64_t c = 0; c < 2; ++c) {
            const int32_t* ids = idx.chunk_indices(0, 0, c);
            CHECK(idx.count(0, 0, c) == 3);
            CHECK(ids[0] == 0 && ids[1] == 1 && ids[2] == 2);
        }
    }

    // single chunk with |delta| row [3, 1, 2], k=2 -> indices [0, 2]
    {
        const Tensor x1 = random_tensor({1, 2, d}, 22);
        const Tensor base = mlp_tile_means(x1, w1, 2);
        Tensor cache = base;
        CHECK(cache.shape() == (std::vector<int64_t>{1, 1, hidden}));
        const float offsets[6] = {3, 1, 2, 0, 0, 0};
        for (int64_t f = 0; f < hidden; ++f) cache[f] -= offsets[f];
        auto idx = mlp_change_indices(x1, w1, cache, 2, 2);
        CHECK(idx.chunk_indices(0, 0, 0)[0] == 0);
        CHECK(idx.chunk_indices(0, 0, 0)[1] == 2);
    }

    // random instance vs full-sort oracle on |fresh - cache|
    {
        const Tensor cache = random_tensor({1, 2, hidden}, 23);
        auto idx = mlp_change_indices(x, w1, cache, 4, chunk);
        for (int64_t c = 0; c < 2; ++c) {
            std::vector<double> delta(static_cast<size_t>(hidden));
            for (int64_t f = 0; f < hidden; ++f) {
                delta[static_cast<size_t>(f)] =
                    std::fabs(static_cast<double>(fresh[c * hidden + f]) - cache[c * hidden + f]);
            }
            std::vector<int32_t> order(static_cast<size_t>(hidden));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&delta](int32_t a, int32_t b) {
                if (delta[static_cast<size_t>(a)] != delta[static_cast<size_t>(b)])
                    return delta[static_cast<size_t>(a)] > delta[static_cast<size_t>(b)];
                return a < b;
            });
            const int32_t* ids = idx.chunk_indices(0, 0, c);
            for (int64_t j = 0; j < 4; ++j) CHECK(ids[j] == order[static_cast<size_t>(j)]);
        }
    }

    CHECK_THROWS(ValueError, mlp_change_indices(x, w1, fresh, 0, chunk));
    CHECK_THROWS(ValueError, mlp_change_indices(x, w1, fresh, hidden + 1, chunk));
}

void test_sparse_delta_mlp() {
    const int64_t d = 3, hidden = 6, n = 4, chunk = 2;
    const MlpWeights w = random_weights(hidden, d, 30);
    const Tensor x1 = random_tensor({1, n, d}, 31);

    // stationary input: delta is exactly zero and the cached output returns
    {
        MlpCache cache;
        const Tensor o1 = mlp_step(x1, w, cache, true, hidden, chunk);
        const Tensor o2 = mlp_step(x1, w, cache, false, 2, chunk);
        CHECK(max_abs_diff(o2, o1) == 0.0);
        CHECK(cache.age == 1);
    }

    const Tensor x2 = random_tensor({1, n, d}, 32);

    // k = F closes the gap to a dense recomputation (b2 cancels in the delta)
    {
        MlpCache cache;
        mlp_step(x1, w, cache, true, hidden, chunk);
        const Tensor o = mlp_step(x2, w, cache, false, hidden, chunk);
        CHECK(max_abs_diff(o, dense_mlp(x2, w).output) <= 1e-4);
    }

    // restricted-dense 64-bit oracle at k=2
    {
        MlpCache cache;
        mlp_step(x1, w, cache, true, hidden, chunk);
        const Tensor a1 = cache.activations;
        const Tensor o1 = cache.outputs;
        SparseIndexSet idx = mlp_change_indices(x2, w.w1, cache.tile_means, 2, chunk);
        const Tensor o = sparse_delta_mlp(x2, w, idx, cache);
        for (int64_t c = 0; c < n / chunk; ++c) {
            const int32_t* ids = idx.chunk_indices(0, 0, c);
            for (int64_t r = c * chunk; r < (c + 1) * chunk; ++r) {
                std::vector<double> want(static_cast<size_t>(d));
                for (int64_t j = 0; j < d; ++j) want[static_cast<size_t>(j)] = o1[r * d + j];
                for (int64_t s = 0; s < 2; ++s) {
                    const int32_t f = ids[s];
                    double pre = static_cast<double>(w.b1[f]);
                    for (int64_t k = 0; k < d; ++k) pre += static_cast<double>(x2[r * d + k]) * w.w1[f * d + k];
                    const double delta = gelu64(pre) - static_cast<double>(a1[r * hidden + f]);
                    for (int64_t j = 0; j < d; ++j) want[static_cast<size_t>(j)] += delta * w.w2[f * d + j];
                }
                for (int64_t j = 0; j < d; ++j) CHECK_CLOSE(o[r * d + j], want[static_cast<size_t>(j)], 1e-5);
            }
        }
    }

    // cache coherence after the sparse step
    {
        MlpCache cache;
        mlp_step(x1, w, cache, true, hidden, chunk);
        const Tensor tm_before = cache.tile_means;
        mlp_step(x2, w, cache, false, 3, chunk);
        for (int64_t c = 0; c < n / chunk; ++c) {
            const int32_t* ids = cache.indices.chunk_indices(0, 0, c);
            for (int64_t r = c * chunk; r < (c + 1) * chunk; ++r) {
                for (int64_t s = 0; s < 3; ++s) {
                    const int32_t f = ids[s];
                    double pre = static_cast<double>(w.b1[f]);
                    for (int64_t k = 0; k < d; ++k) pre += static_cast<double>(x2[r * d + k]) * w.w1[f * d + k];
                    CHECK_CLOSE(cache.activations[r * hidden + f], gelu64(pre), 1e-5);
                }
            }
        }
        // tile means stay pinned to the last dense step
        CHECK(max_abs_diff(cache.tile_means, tm_before) == 0.0);
    }

    // errors: no dense step yet; index out of range
    {
        MlpCache cache;
        CHECK_THROWS(StateError, mlp_step(x1, w, cache, false, 2, chunk));
        MlpCache cache2;
        mlp_step(x1, w, cache2, true, hidden, chunk);
        SparseIndexSet bad = SparseIndexSet::empty(1, 1, n / chunk, chunk, 1, hidden);
        bad.chunk_indices(0, 0, 0)[0] = static_cast<int32_t>(hidden);
        bad.counts[0] = 1;
        CHECK_THROWS(IndexError, sparse_delta_mlp(x2, w, bad, cache2));
    }
}

void test_subtract_then_add_equivalence() {
    // one-pass delta == o1 - [a1*M] @ w2 + [a2*M] @ w2 on the selected mask
    const int64_t d = 5, hidden = 12, n = 8, chunk = 4;
    const MlpWeights w = random_weights(hidden, d, 40);
    const Tensor x1 = random_tensor({1, n, d}, 41);
    const Tensor x2 = random_tensor({1, n, d}, 42);

    MlpCache cache;
    mlp_step(x1, w, cache, true, hidden, chunk);
    const Tensor o1 = cache.outputs;
    const Tensor a1 = cache.activations;
    const SparseIndexSet idx = mlp_change_indices(x2, w.w1, cache.tile_means, 3, chunk);
    const Tensor one_pass = sparse_delta_mlp(x2, w, idx, cache);

    const Tensor a2 = dense_mlp(x2, w).act;
    Tensor explicit_form = o1;
    for (int64_t c = 0; c < n / chunk; ++c) {
        const int32_t* ids = idx.chunk_indices(0, 0, c);
        for (int64_t r = c * chunk; r < (c + 1) * chunk; ++r) {
            for (int32_t s = 0; s < idx.count(0, 0, c); ++s) {
                const int32_t f = ids[s];
                for (int64_t j = 0; j < d; ++j) {
                    explicit_form[r * d + j] -= a1[r * hidden + f] * w.w2[f * d + j];
                    explicit_form[r * d + j] += a2[r * hidden + f] * w.w2[f * d + j];
                }
            }
        }
    }
    CHECK(max_abs_diff(one_pass, explicit_form) <= 1e-4);

    // unselected neurons contribute nothing to o - o1: the masked full delta
    // accounts for the whole output change
    Tensor masked_delta_only = one_pass;
    for (int64_t i = 0; i < masked_delta_only.numel(); ++i) masked_delta_only[i] -= o1[i];
    for (int64_t c = 0; c < n / chunk; ++c) {
        const int32_t* ids = idx.chunk_indices(0, 0, c);
        for (int64_t r = c * chunk; r < (c + 1) * chunk; ++r) {
            for (int64_t j = 0; j < d; ++j) {
                double recon = 0.0;
                for (int32_t s = 0; s < idx.count(0, 0, c); ++s) {
                    const int32_t f = ids[s];
                    recon += (static_cast<double>(a2[r * hidden + f]) - a1[r * hidden + f]) *
                             w.w2[f * d + j];
                }
                CHECK_CLOSE(masked_delta_only[r * d + j], recon, 1e-5);
            }
        }
    }
}

void test_sparse_delta_random_oracle() {
    // random shapes and two consecutive sparse steps against a 64-bit mirror
    // of the cache semantics (activations replaced per recomputed neuron,
    // outputs accumulated)
    GaussianRng pick(777);
    for (int trial = 0; trial < 20; ++trial) {
        const int64_t chunk = std::vector<int64_t>{2, 4}[pick.next_u64() % 2];
        const int64_t n = chunk * static_cast<int64_t>(2 + pick.next_u64() % 4);
        const int64_t d = 2 + static_cast<int64_t>(pick.next_u64() % 5);
        const int64_t hidden = 3 + static_cast<int64_t>(pick.next_u64() % 14);
        const int64_t batch = 1 + static_cast<int64_t>(pick.next_u64() % 2);
        const int64_t k = 1 + static_cast<int64_t>(pick.next_u64() % hidden);
        const uint64_t seed = 9000 + static_cast<uint64_t>(trial);

        const MlpWeights w = random_weights(hidden, d, seed);
        const Tensor x1 = random_tensor({batch, n, d}, seed + 10);

        MlpCache cache;
        mlp_step(x1, w, cache, true, hidden, chunk);

        // double-precision mirrors seeded from the dense-step caches
        std::vector<double> a_mirror(cache.activations.values().begin(),
                                     cache.activations.values().end());
        std::vector<double> o_mirror(cache.outputs.values().begin(),
                                     cache.outputs.values().end());

        for (int step = 0; step < 2; ++step) {
            const Tensor x2 = random_tensor({batch, n, d}, seed + 20 + 7 * step);
            const SparseIndexSet idx = mlp_change_indices(x2, w.w1, cache.tile_means, k, chunk);
            const Tensor got = mlp_step(x2, w, cache, false, k, chunk);

            for (int64_t b = 0; b < batch; ++b) {
                for (int64_t c = 0; c < n / chunk; ++c) {
                    const int32_t* ids = idx.chunk_indices(b, 0, c);
                    for (int64_t r = c * chunk; r < (c + 1) * chunk; ++r) {
                        for (int32_t s = 0; s < idx.count(b, 0, c); ++s) {
                            const int32_t f = ids[s];
                            double pre = static_cast<double>(w.b1[f]);
                            for (int64_t q = 0; q < d; ++q) {
                                pre += static_cast<double>(x2[(b * n + r) * d + q]) * w.w1[f * d + q];
                            }
                            const double fresh = gelu64(pre);
                            const double delta =
                                fresh - a_mirror[static_cast<size_t>((b * n + r) * hidden + f)];
                            a_mirror[static_cast<size_t>((b * n + r) * hidden + f)] = fresh;
                            for (int64_t j = 0; j < d; ++j) {
                                o_mirror[static_cast<size_t>((b * n + r) * d + j)] +=
                                    delta * w.w2[f * d + j];
                            }
                        }
                    }
                }
            }
            for (int64_t i = 0; i < got.numel(); ++i) {
                CHECK_CLOSE(got[i], o_mirror[static_cast<size_t>(i)], 1e-4);
            }
            for (int64_t i = 0; i < cache.activations.numel(); ++i) {
                CHECK_CLOSE(cache.activations[i], a_mirror[static_cast<size_t>(i)], 1e-5);
            }
        }
    }
}

void test_r2_monotonic_in_k() {
    const int64_t d = 8, hidden = 32, n = 16, chunk = 4;
    const MlpWeights w = random_weights(hidden, d, 50);
    const Tensor x1 = random_tensor({1, n, d}, 51);
    GaussianRng noise(52);
    Tensor x2 = x1;
    for (int64_t i = 0; i < x2.numel(); ++i) x2[i] += 0.05f * noise.next();

    const Tensor o1 = dense_mlp(x1, w).output;
    const Tensor o2 = dense_mlp(x2, w).output;
    Tensor true_delta = o2;
    for (int64_t i = 0; i < true_delta.numel(); ++i) true_delta[i] -= o1[i];

    auto r2_at_k = [&](int64_t k) {
        MlpCache cache;
        mlp_step(x1, w, cache, true, hidden, chunk);
        const Tensor approx = mlp_step(x2, w, cache, false, k, chunk);
        Tensor approx_delta = approx;
        for (int64_t i = 0; i < approx_delta.numel(); ++i) approx_delta[i] -= o1[i];
        return r_squared(true_delta, approx_delta);
    };

    double prev = -1e9;
    for (int64_t k : {hidden / 8, hidden / 4, hidden / 2, hidden}) {
        const double r2 = r2_at_k(k);
        CHECK(r2 >= prev - 1e-6);
        prev = r2;
    }
    CHECK(prev >= 1.0 - 1e-6);  // k = F is lossless
}

}  // namespace

int main() {
    test_dense_mlp();
    test_linearity_consistency();
    test_change_indices();
    test_sparse_delta_mlp();
    test_subtract_then_add_equivalence();
    test_sparse_delta_random_oracle();
    test_r2_monotonic_in_k();
    std::cout << "mlp tests passed\n";
    return 0;
}
