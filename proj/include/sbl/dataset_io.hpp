#pragma once

#include <cstdint>
#include <string>

#include "sbl/datagen.hpp"

namespace sbl {

/// Binary dataset container (see docs/FORMATS.md):
///   "SBLDATA1" | u64 meta_len | meta JSON | u64 n_arrays |
///   n_arrays x (u64 rows | u64 cols | rows*cols*2 f64, row-major [re, im]) |
///   u64 FNV-1a checksum of every preceding byte.
/// All integers and floats little-endian.
inline constexpr char kDatasetMagic[9] = "SBLDATA1";
inline constexpr int kDatasetVersion = 1;

void write_dataset(const Dataset& ds, const std::string& path);
Dataset read_dataset(const std::string& path);

std::string encode_dataset(const Dataset& ds);
Dataset decode_dataset(const std::string& bytes, const std::string& origin = "<memory>");

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t h = 0xcbf29ce484222325ULL);

}  // namespace sbl
