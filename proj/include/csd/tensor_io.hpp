#pragma once

#include <iosfwd>
#include <string>

#include "csd/tensor.hpp"

namespace csd {

// Binary tensor dump: magic "CSDT", u8 version=1, u8 ndim,
// ndim x u32 little-endian dims, raw f32 little-endian payload.

void save_tensor(std::ostream& os, const Tensor& t);
void save_tensor(const std::string& path, const Tensor& t);

Tensor load_tensor(std::istream& is);
Tensor load_tensor(const std::string& path);

/// FNV-1a 64-bit over the little-endian f32 payload, as 16 hex digits.
std::string tensor_digest(const Tensor& t);

}  // namespace csd
