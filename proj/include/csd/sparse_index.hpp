#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "csd/tensor.hpp"

namespace csd {

/// Per-(batch, head, token-chunk) selection of rows from a domain of size
/// `domain` (keys for attention, neurons for MLP; heads == 1 for MLP).
/// For each chunk the first `count` index slots are unique, in-range, and
/// ordered by descending score; the rest are padding.
struct SparseIndexSet {
    int64_t batch = 0;
    int64_t heads = 0;
    int64_t chunks = 0;
    int64_t chunk_size = 0;
    int64_t k_max = 0;
    int64_t domain = 0;
    std::vector<int32_t> indices;  // batch*heads*chunks*k_max
    std::vector<int32_t> counts;   // batch*heads*chunks

    static SparseIndexSet empty(int64_t batch, int64_t heads, int64_t chunks, int64_t chunk_size,
                                int64_t k_max, int64_t domain);

    const int32_t* chunk_indices(int64_t b, int64_t h, int64_t c) const {
        return indices.data() + ((b * heads + h) * chunks + c) * k_max;
    }
    int32_t* chunk_indices(int64_t b, int64_t h, int64_t c) {
        return indices.data() + ((b * heads + h) * chunks + c) * k_max;
    }
    int32_t count(int64_t b, int64_t h, int64_t c) const {
        return counts[static_cast<size_t>((b * heads + h) * chunks + c)];
    }

    /// Checks ranges, uniqueness of active entries, and storage sizes.
    void validate() const;
};

/// Per-chunk top-k of a [B x H x C x M] score tensor. Larger score wins;
/// ties break toward the lower index; output indices are stored in
/// descending-score order. counts is k for every chunk.
SparseIndexSet select_top_k(const Tensor& scores, int64_t k, int64_t chunk_size);

/// Static sparsity pattern file:
/// {"chunk_size": c, "k_max": k, "entries": [[b, h, chunk, [ids...]], ...]}.
/// Chunks without an entry get count 0. Entries must fit the given dims.
SparseIndexSet load_index_set_json(const std::string& text, int64_t batch, int64_t heads,
                                   int64_t chunks, int64_t domain);
SparseIndexSet load_index_set_json_file(const std::string& path, int64_t batch, int64_t heads,
                                        int64_t chunks, int64_t domain);

}  // namespace csd
