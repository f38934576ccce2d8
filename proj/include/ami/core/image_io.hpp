#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "ami/core/raster.hpp"

namespace ami {

enum class ImageFormat { unknown, png, jpeg };

ImageFormat sniff_image_format(std::span<const std::uint8_t> bytes) noexcept;

/// Decodes PNG or JPEG bytes to RGBA. Throws InputError when the bytes are
/// not a decodable image.
Raster decode_image(std::span<const std::uint8_t> bytes);
Raster read_image(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_png(const Raster& image);
std::vector<std::uint8_t> encode_jpeg(const Raster& image, int quality = 90);

/// Writes a PNG atomically.
void write_png(const std::filesystem::path& path, const Raster& image);

}  // namespace ami
