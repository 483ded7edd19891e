#include "csd/voxel.hpp"

#include <string>

namespace csd {

void VoxelLayout::validate() const {
    if (t < 1 || h < 1 || w < 1 || vt < 1 || vh < 1 || vw < 1) {
        throw ConfigError("voxel layout dimensions must be >= 1");
    }
    if (t % vt != 0 || h % vh != 0 || w % vw != 0) {
        throw ConfigError("voxel (" + std::to_string(vt) + "," + std::to_string(vh) + "," +
                          std::to_string(vw) + ") does not tile grid (" + std::to_string(t) + "," +
                          std::to_string(h) + "," + std::to_string(w) + ")");
    }
}

std::vector<int64_t> voxel_permutation(const VoxelLayout& layout) {
    layout.validate();
    const int64_t tc_n = layout.t / layout.vt;
    const int64_t hc_n = layout.h / layout.vh;
    const int64_t wc_n = layout.w / layout.vw;
    std::vector<int64_t> perm;
    perm.reserve(static_cast<size_t>(layout.tokens()));
    for (int64_t tc = 0; tc < tc_n; ++tc) {
        for (int64_t hc = 0; hc < hc_n; ++hc) {
            for (int64_t wc = 0; wc < wc_n; ++wc) {
                for (int64_t it = 0; it < layout.vt; ++it) {
                    for (int64_t ih = 0; ih < layout.vh; ++ih) {
                        for (int64_t iw = 0; iw < layout.vw; ++iw) {
                            const int64_t tt = tc * layout.vt + it;
                            const int64_t hh = hc * layout.vh + ih;
                            const int64_t ww = wc * layout.vw + iw;
                            perm.push_back((tt * layout.h + hh) * layout.w + ww);
                        }
                    }
                }
            }
        }
    }
    return perm;
}

VoxelOrderResult voxel_order(const Tensor& x, const VoxelLayout& layout) {
    layout.validate();
    if (x.rank() != 5) {
        throw ShapeError("voxel_order expects [B x T x H x W x D], got " + shape_str(x.shape()));
    }
    if (x.dim(1) != layout.t || x.dim(2) != layout.h || x.dim(3) != layout.w) {
        throw ShapeError("voxel_order: tensor grid " + shape_str(x.shape()) +
                         " does not match layout (" + std::to_string(layout.t) + "," +
                         std::to_string(layout.h) + "," + std::to_string(layout.w) + ")");
    }
    const int64_t batch = x.dim(0);
    const int64_t depth = x.dim(4);
    const int64_t n = layout.tokens();

    VoxelOrderResult res;
    res.permutation = voxel_permutation(layout);
    res.reordered = Tensor({batch, n, depth});
    const float* in = x.data();
    float* out = res.reordered.data();
    for (int64_t b = 0; b < batch; ++b) {
        const float* src = in + b * n * depth;
        float* dst = out + b * n * depth;
        for (int64_t pos = 0; pos < n; ++pos) {
            const float* row = src + res.permutation[static_cast<size_t>(pos)] * depth;
            float* w = dst + pos * depth;
            for (int64_t d = 0; d < depth; ++d) w[d] = row[d];
        }
    }
    return res;
}

Tensor reverse_voxel_order(const Tensor& x, const VoxelLayout& layout) {
    layout.validate();
    if (x.rank() != 3) {
        throw ShapeError("reverse_voxel_order expects [B x N x D], got " + shape_str(x.shape()));
    }
    const int64_t n = layout.tokens();
    if (x.dim(1) != n) {
        throw ShapeError("reverse_voxel_order: sequence length " + std::to_string(x.dim(1)) +
                         " does not match layout token count " + std::to_string(n));
    }
    const int64_t batch = x.dim(0);
    const int64_t depth = x.dim(2);
    const auto perm = voxel_permutation(layout);

    Tensor out({batch, layout.t, layout.h, layout.w, depth});
    const float* in = x.data();
    float* o = out.data();
    for (int64_t b = 0; b < batch; ++b) {
        const float* src = in + b * n * depth;
        float* dst = o + b * n * depth;
        for (int64_t pos = 0; pos < n; ++pos) {
            float* w = dst + perm[static_cast<size_t>(pos)] * depth;
            const float* row = src + pos * depth;
            for (int64_t d = 0; d < depth; ++d) w[d] = row[d];
        }
    }
    return out;
}

}  // namespace csd
