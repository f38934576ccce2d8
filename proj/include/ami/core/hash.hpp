#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>

#include "ami/core/raster.hpp"

namespace ami {

/// Lowercase hex SHA-256 of raw bytes.
std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_hex(std::string_view text);

/// Digest of a decoded raster: dimensions followed by the RGBA bytes. Used to
/// key stub fixtures independently of the encoding a file happened to use.
std::string raster_digest(const Raster& image);

}  // namespace ami
