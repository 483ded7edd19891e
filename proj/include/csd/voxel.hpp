#pragma once

#include <cstdint>
#include <vector>

#include "csd/tensor.hpp"

namespace csd {

/// Token grid (t x h x w) and the voxel tile (vt x vh x vw) it is carved into.
/// Each voxel must tile the grid exactly; when used with sparse attention the
/// voxel volume equals the attention chunk size.
struct VoxelLayout {
    int64_t t = 1, h = 1, w = 1;
    int64_t vt = 1, vh = 1, vw = 1;

    int64_t tokens() const { return t * h * w; }
    int64_t voxel_volume() const { return vt * vh * vw; }
    void validate() const;
};

struct VoxelOrderResult {
    Tensor reordered;                  // [B x N x D]
    std::vector<int64_t> permutation;  // new position -> original flat raster position
};

/// Reorders a [B x T x H x W x D] token grid so each run of vt*vh*vw
/// consecutive tokens is one voxel. Voxels are enumerated in (tc, hc, wc)
/// raster order and tokens within a voxel in (vt, vh, vw) raster order.
VoxelOrderResult voxel_order(const Tensor& x, const VoxelLayout& layout);

/// Exact inverse of voxel_order: [B x N x D] back to [B x T x H x W x D].
Tensor reverse_voxel_order(const Tensor& x, const VoxelLayout& layout);

/// The permutation voxel_order applies, without moving any data.
std::vector<int64_t> voxel_permutation(const VoxelLayout& layout);

}  // namespace csd
