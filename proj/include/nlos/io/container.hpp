#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nlos/tensor/params.hpp"

// Binary layout, all integers little-endian:
//   "NLT1"  u64 record_count
//   per record: u32 name_len, name bytes (UTF-8), u8 dtype (1 = f64),
//               u32 rank, u64 extents[rank], f64 payload[prod(extents)]

namespace nlos::io {

inline constexpr std::uint8_t kDtypeF64 = 1;

std::vector<std::uint8_t> encode(const ParamSet& tensors);
/// Throws FormatError on bad magic, truncation, duplicate names, unknown
/// dtype or trailing bytes.
ParamSet decode(const std::vector<std::uint8_t>& bytes);

void write_container(const std::filesystem::path& path, const ParamSet& tensors);
ParamSet read_container(const std::filesystem::path& path);

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);
void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);

/// FNV-1a over the bytes, for quick equality checks.
std::uint64_t checksum(const std::vector<std::uint8_t>& bytes) noexcept;

}  // namespace nlos::io
