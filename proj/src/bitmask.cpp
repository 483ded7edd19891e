#include "csd/bitmask.hpp"

#include <bit>
#include <cstring>
#include <fstream>

#include "csd/error.hpp"

namespace csd {

int64_t BitpackedMask::popcount() const {
    int64_t total = 0;
    for (uint8_t w : words) total += std::popcount(w);
    return total;
}

BitpackedMask pack_mask(const std::vector<bool>& bits) {
    BitpackedMask m;
    m.n_bits = static_cast<int64_t>(bits.size());
    m.words.assign(static_cast<size_t>((m.n_bits + 7) / 8), 0);
    for (int64_t i = 0; i < m.n_bits; ++i) {
        if (bits[static_cast<size_t>(i)]) {
            m.words[static_cast<size_t>(i / 8)] |= static_cast<uint8_t>(1u << (i % 8));
        }
    }
    return m;
}

std::vector<bool> unpack_mask(const BitpackedMask& m) {
    if (static_cast<int64_t>(m.words.size()) != (m.n_bits + 7) / 8) {
        throw IoError("bitpacked mask storage does not match its bit length");
    }
    std::vector<bool> bits(static_cast<size_t>(m.n_bits));
    for (int64_t i = 0; i < m.n_bits; ++i) bits[static_cast<size_t>(i)] = m.test(i);
    return bits;
}

std::vector<BitpackedMask> index_set_to_masks(const SparseIndexSet& idx, int64_t n) {
    idx.validate();
    if (n < idx.domain) {
        throw ValueError("mask length " + std::to_string(n) + " smaller than index domain " +
                         std::to_string(idx.domain));
    }
    std::vector<BitpackedMask> masks;
    masks.reserve(static_cast<size_t>(idx.batch * idx.heads * idx.chunks));
    std::vector<bool> bits;
    for (int64_t b = 0; b < idx.batch; ++b) {
        for (int64_t h = 0; h < idx.heads; ++h) {
            for (int64_t c = 0; c < idx.chunks; ++c) {
                bits.assign(static_cast<size_t>(n), false);
                const int32_t cnt = idx.count(b, h, c);
                const int32_t* ids = idx.chunk_indices(b, h, c);
                for (int32_t j = 0; j < cnt; ++j) {
                    if (ids[j] < 0 || ids[j] >= n) {
                        throw IndexError("mask index " + std::to_string(ids[j]) +
                                         " out of range [0, " + std::to_string(n) + ")");
                    }
                    bits[static_cast<size_t>(ids[j])] = true;
                }
                masks.push_back(pack_mask(bits));
            }
        }
    }
    return masks;
}

namespace {
constexpr char kMagic[4] = {'C', 'S', 'M', 'K'};
}

void save_mask(std::ostream& os, const BitpackedMask& m) {
    os.write(kMagic, 4);
    const uint32_t n = static_cast<uint32_t>(m.n_bits);
    char b[4] = {static_cast<char>(n & 0xff), static_cast<char>((n >> 8) & 0xff),
                 static_cast<char>((n >> 16) & 0xff), static_cast<char>((n >> 24) & 0xff)};
    os.write(b, 4);
    os.write(reinterpret_cast<const char*>(m.words.data()),
             static_cast<std::streamsize>(m.words.size()));
    if (!os) throw IoError("failed to write mask stream");
}

void save_mask(const std::string& path, const BitpackedMask& m) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    save_mask(f, m);
}

BitpackedMask load_mask(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("bad mask file magic (expected CSMK)");
    }
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("mask file truncated in header");
    const uint32_t n = static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
                       (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
    BitpackedMask m;
    m.n_bits = n;
    m.words.resize(static_cast<size_t>((n + 7) / 8));
    is.read(reinterpret_cast<char*>(m.words.data()),
            static_cast<std::streamsize>(m.words.size()));
    if (!is) throw IoError("mask file truncated in payload");
    return m;
}

BitpackedMask load_mask(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for reading");
    return load_mask(f);
}

}  // namespace csd
