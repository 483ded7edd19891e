#include "csd/sparse_index.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include <json.hpp>

namespace csd {

SparseIndexSet SparseIndexSet::empty(int64_t batch, int64_t heads, int64_t chunks,
                                     int64_t chunk_size, int64_t k_max, int64_t domain) {
    SparseIndexSet s;
    s.batch = batch;
    s.heads = heads;
    s.chunks = chunks;
    s.chunk_size = chunk_size;
    s.k_max = k_max;
    s.domain = domain;
    s.indices.assign(static_cast<size_t>(batch * heads * chunks * k_max), 0);
    s.counts.assign(static_cast<size_t>(batch * heads * chunks), 0);
    return s;
}

void SparseIndexSet::validate() const {
    if (batch < 1 || heads < 1 || chunks < 1 || chunk_size < 1 || domain < 1) {
        throw ValueError("sparse index set has empty dimensions");
    }
    if (k_max < 0 || k_max > domain) {
        throw ValueError("sparse index set k_max " + std::to_string(k_max) +
                         " outside [0, domain=" + std::to_string(domain) + "]");
    }
    if (static_cast<int64_t>(indices.size()) != batch * heads * chunks * k_max ||
        static_cast<int64_t>(counts.size()) != batch * heads * chunks) {
        throw ValueError("sparse index set storage does not match its dimensions");
    }
    for (int64_t b = 0; b < batch; ++b) {
        for (int64_t h = 0; h < heads; ++h) {
            for (int64_t c = 0; c < chunks; ++c) {
                const int32_t cnt = count(b, h, c);
                if (cnt < 0 || cnt > k_max) {
                    throw ValueError("sparse index count " + std::to_string(cnt) +
                                     " outside [0, k_max=" + std::to_string(k_max) + "]");
                }
                const int32_t* ids = chunk_indices(b, h, c);
                std::unordered_set<int32_t> seen;
                for (int32_t j = 0; j < cnt; ++j) {
                    if (ids[j] < 0 || ids[j] >= domain) {
                        throw IndexError("sparse index " + std::to_string(ids[j]) +
                                         " out of range [0, " + std::to_string(domain) + ")");
                    }
                    if (!seen.insert(ids[j]).second) {
                        throw IndexError("duplicate sparse index " + std::to_string(ids[j]) +
                                         " within one chunk");
                    }
                }
            }
        }
    }
}

SparseIndexSet select_top_k(const Tensor& scores, int64_t k, int64_t chunk_size) {
    if (scores.rank() != 4) {
        throw ShapeError("select_top_k expects [B x H x C x M] scores, got " +
                         shape_str(scores.shape()));
    }
    const int64_t batch = scores.dim(0);
    const int64_t heads = scores.dim(1);
    const int64_t chunks = scores.dim(2);
    const int64_t domain = scores.dim(3);
    if (k < 1 || k > domain) {
        throw ValueError("select_top_k: k=" + std::to_string(k) + " outside [1, " +
                         std::to_string(domain) + "]");
    }
    SparseIndexSet out = SparseIndexSet::empty(batch, heads, chunks, chunk_size, k, domain);

    std::vector<int32_t> order(static_cast<size_t>(domain));
    const float* base = scores.data();
    const int64_t total_chunks = batch * heads * chunks;
    for (int64_t row = 0; row < total_chunks; ++row) {
        const float* s = base + row * domain;
        std::iota(order.begin(), order.end(), 0);
        // Descending score, lower index first on ties.
        std::partial_sort(order.begin(), order.begin() + k, order.end(),
                          [s](int32_t a, int32_t b) {
                              if (s[a] != s[b]) return s[a] > s[b];
                              return a < b;
                          });
        int32_t* dst = out.indices.data() + row * k;
        for (int64_t j = 0; j < k; ++j) dst[j] = order[static_cast<size_t>(j)];
        out.counts[static_cast<size_t>(row)] = static_cast<int32_t>(k);
    }
    return out;
}

SparseIndexSet load_index_set_json(const std::string& text, int64_t batch, int64_t heads,
                                   int64_t chunks, int64_t domain) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw IoError(std::string("sparsity pattern JSON parse failure: ") + e.what());
    }
    if (!doc.is_object() || !doc.contains("chunk_size") || !doc.contains("k_max") ||
        !doc.contains("entries")) {
        throw IoError("sparsity pattern JSON must contain chunk_size, k_max, entries");
    }
    const int64_t chunk_size = doc["chunk_size"].get<int64_t>();
    const int64_t k_max = doc["k_max"].get<int64_t>();
    if (k_max < 1 || k_max > domain) {
        throw ValueError("sparsity pattern k_max " + std::to_string(k_max) + " outside [1, " +
                         std::to_string(domain) + "]");
    }
    SparseIndexSet out = SparseIndexSet::empty(batch, heads, chunks, chunk_size, k_max, domain);
    for (const auto& entry : doc["entries"]) {
        if (!entry.is_array() || entry.size() != 4) {
            throw IoError("sparsity pattern entry must be [b, h, chunk, [ids...]]");
        }
        const int64_t b = entry[0].get<int64_t>();
        const int64_t h = entry[1].get<int64_t>();
        const int64_t c = entry[2].get<int64_t>();
        if (b < 0 || b >= batch || h < 0 || h >= heads || c < 0 || c >= chunks) {
            std::ostringstream os;
            os << "sparsity pattern entry (" << b << "," << h << "," << c
               << ") outside dims (" << batch << "," << heads << "," << chunks << ")";
            throw IndexError(os.str());
        }
        const auto& ids = entry[3];
        if (static_cast<int64_t>(ids.size()) > k_max) {
            throw ValueError("sparsity pattern entry lists more than k_max ids");
        }
        int32_t* dst = out.chunk_indices(b, h, c);
        int32_t n = 0;
        for (const auto& idv : ids) {
            const int64_t id = idv.get<int64_t>();
            if (id < 0 || id >= domain) {
                throw IndexError("sparsity pattern index " + std::to_string(id) +
                                 " out of range [0, " + std::to_string(domain) + ")");
            }
            dst[n++] = static_cast<int32_t>(id);
        }
        out.counts[static_cast<size_t>((b * heads + h) * chunks + c)] = n;
    }
    out.validate();
    return out;
}

SparseIndexSet load_index_set_json_file(const std::string& path, int64_t batch, int64_t heads,
                                        int64_t chunks, int64_t domain) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open " + path + " for reading");
    std::ostringstream buf;
    buf << f.rdbuf();
    return load_index_set_json(buf.str(), batch, heads, chunks, domain);
}

}  // namespace csd
