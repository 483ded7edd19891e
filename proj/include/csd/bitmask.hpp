#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "csd/sparse_index.hpp"

namespace csd {

/// Boolean vector packed 8 per byte, LSB-first: bit i of byte j is element
/// 8*j + i. Trailing pad bits are zero.
struct BitpackedMask {
    int64_t n_bits = 0;
    std::vector<uint8_t> words;

    bool test(int64_t i) const {
        return (words[static_cast<size_t>(i / 8)] >> (i % 8)) & 1u;
    }
    int64_t popcount() const;
};

BitpackedMask pack_mask(const std::vector<bool>& bits);
std::vector<bool> unpack_mask(const BitpackedMask& m);

/// One mask per (batch, head, chunk): bit j set iff key/neuron j is active
/// for that chunk. Popcount of each mask equals the chunk's count.
std::vector<BitpackedMask> index_set_to_masks(const SparseIndexSet& idx, int64_t n);

// Mask file: magic "CSMK", u32 n_bits little-endian, packed bytes.
void save_mask(std::ostream& os, const BitpackedMask& m);
void save_mask(const std::string& path, const BitpackedMask& m);
BitpackedMask load_mask(std::istream& is);
BitpackedMask load_mask(const std::string& path);

}  // namespace csd
