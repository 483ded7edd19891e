#include "csd/tensor_io.hpp"

#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

namespace csd {

namespace {

constexpr char kMagic[4] = {'C', 'S', 'D', 'T'};
constexpr uint8_t kVersion = 1;

void put_u32_le(std::ostream& os, uint32_t v) {
    char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
                 static_cast<char>((v >> 16) & 0xff), static_cast<char>((v >> 24) & 0xff)};
    os.write(b, 4);
}

uint32_t get_u32_le(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    if (!is) throw IoError("tensor file truncated while reading a u32");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

void put_f32_le(std::ostream& os, float v) {
    uint32_t bits;
    std::memcpy(&bits, &v, 4);
    put_u32_le(os, bits);
}

float get_f32_le(std::istream& is) {
    uint32_t bits = get_u32_le(is);
    float v;
    std::memcpy(&v, &bits, 4);
    return v;
}

}  // namespace

void save_tensor(std::ostream& os, const Tensor& t) {
    if (t.rank() > 255) throw IoError("tensor rank exceeds the format's u8 ndim field");
    os.write(kMagic, 4);
    os.put(static_cast<char>(kVersion));
    os.put(static_cast<char>(t.rank()));
    for (int64_t i = 0; i < t.rank(); ++i) {
        int64_t d = t.dim(i);
        if (d > std::numeric_limits<uint32_t>::max()) {
            throw IoError("tensor dimension exceeds the format's u32 field");
        }
        put_u32_le(os, static_cast<uint32_t>(d));
    }
    for (int64_t i = 0; i < t.numel(); ++i) put_f32_le(os, t[i]);
    if (!os) throw IoError("failed to write tensor stream");
}

void save_tensor(const std::string& path, const Tensor& t) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for writing");
    save_tensor(f, t);
}

Tensor load_tensor(std::istream& is) {
    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0) {
        throw IoError("bad tensor file magic (expected CSDT)");
    }
    const int version = is.get();
    if (version != kVersion) {
        throw IoError("unsupported tensor file version " + std::to_string(version));
    }
    const int ndim = is.get();
    if (ndim < 0 || !is) throw IoError("tensor file truncated in header");
    std::vector<int64_t> shape(static_cast<size_t>(ndim));
    for (auto& d : shape) d = static_cast<int64_t>(get_u32_le(is));
    const int64_t n = shape_numel(shape);
    std::vector<float> data(static_cast<size_t>(n));
    for (auto& v : data) v = get_f32_le(is);
    return Tensor(std::move(shape), std::move(data));
}

Tensor load_tensor(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path + " for reading");
    return load_tensor(f);
}

std::string tensor_digest(const Tensor& t) {
    uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&h](unsigned char byte) {
        h ^= byte;
        h *= 0x100000001b3ull;
    };
    for (int64_t i = 0; i < t.numel(); ++i) {
        uint32_t bits;
        float v = t[i];
        std::memcpy(&bits, &v, 4);
        mix(static_cast<unsigned char>(bits & 0xff));
        mix(static_cast<unsigned char>((bits >> 8) & 0xff));
        mix(static_cast<unsigned char>((bits >> 16) & 0xff));
        mix(static_cast<unsigned char>((bits >> 24) & 0xff));
    }
    std::ostringstream os;
    os << std::hex;
    for (int shift = 60; shift >= 0; shift -= 4) os << ((h >> shift) & 0xf);
    return os.str();
}

}  // namespace csd
