#pragma once

#include <cstdint>
#include <filesystem>

#include "renn/fcn.hpp"

namespace renn {

// Binary model file: magic "RENNW001", a 32-bit format version, the
// (in_channels, hidden_channels) pair as 32-bit integers, every parameter grid
// in declaration order as little-endian 64-bit floats (kernel and bias per
// conv or deconv; gamma, beta, running mean, running variance per batch norm),
// and a trailing CRC-32 of all preceding bytes.
void save_weights(const Model& m, const std::filesystem::path& path);

// Loads and validates; the model comes back in inference mode.
// Checksum, version, and shape failures raise distinct error types.
Model load_weights(const std::filesystem::path& path, const FcnConfig& expected);

// Reads just the stored (in_channels, hidden_channels) pair, still
// checksum-verified.
FcnConfig peek_weights_config(const std::filesystem::path& path);

std::uint32_t crc32(const std::uint8_t* data, std::size_t n);

}  // namespace renn
