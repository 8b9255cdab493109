#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "qcs/nn/network.hpp"

namespace qcs::nn {

inline constexpr std::uint16_t kWeightFormatVersion = 1;

/// Weight file layout (all integers little-endian):
///
///   "QCSW" | u16 version | u16 arch id | u32 input size | u32 tensor count
///   per tensor: u16 name length, name bytes, u8 rank, u32 dims[rank], u64 byte offset
///   u64 data bytes | f32 data ... | u32 CRC32 of everything before it
std::vector<std::uint8_t> save_weights(const Network<float>& net);

/// Throws ChecksumFailure, VersionMismatch, ArchMismatch (when `expected` is given and differs)
/// or ShapeMismatch.
Network<float> load_weights(std::span<const std::uint8_t> bytes, std::optional<ArchId> expected = std::nullopt);

void save_weights_file(const std::filesystem::path& path, const Network<float>& net);
Network<float> load_weights_file(const std::filesystem::path& path, std::optional<ArchId> expected = std::nullopt);

/// CRC32 over the raw parameter bytes; equal weights give equal checksums.
std::uint32_t weights_checksum(const Network<float>& net);

std::uint32_t crc32(std::span<const std::uint8_t> bytes);

}  // namespace qcs::nn
