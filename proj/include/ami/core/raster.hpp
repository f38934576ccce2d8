#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace ami {

struct Rgba {
  std::uint8_t r = 0, g = 0, b = 0, a = 255;
  friend bool operator==(const Rgba&, const Rgba&) = default;
};

/// 8-bit RGBA image, row-major, tightly packed.
class Raster {
 public:
  static constexpr int kChannels = 4;

  Raster() = default;
  Raster(int width, int height, Rgba fill = {});

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return width_ == 0 || height_ == 0; }
  std::size_t area() const noexcept { return static_cast<std::size_t>(width_) * height_; }

  Rgba at(int x, int y) const noexcept {
    const std::uint8_t* p = data_.data() + offset(x, y);
    return {p[0], p[1], p[2], p[3]};
  }
  void set(int x, int y, Rgba c) noexcept {
    std::uint8_t* p = data_.data() + offset(x, y);
    p[0] = c.r;
    p[1] = c.g;
    p[2] = c.b;
    p[3] = c.a;
  }

  std::span<std::uint8_t> bytes() noexcept { return data_; }
  std::span<const std::uint8_t> bytes() const noexcept { return data_; }
  std::span<const std::uint8_t> row(int y) const noexcept {
    return std::span(data_).subspan(offset(0, y), static_cast<std::size_t>(width_) * kChannels);
  }

  /// Copy of the sub-rectangle [x0,x1) x [y0,y1); the rectangle must lie inside.
  Raster sub_image(int x0, int y0, int x1, int y1) const;

  friend bool operator==(const Raster&, const Raster&) = default;

 private:
  std::size_t offset(int x, int y) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * kChannels;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> data_;
};

/// Single-channel 8-bit image.
struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(int x, int y) const noexcept {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

/// Integer luma, (299 R + 587 G + 114 B) / 1000 rounded.
inline std::uint8_t luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) noexcept {
  return static_cast<std::uint8_t>((299u * r + 587u * g + 114u * b + 500u) / 1000u);
}

}  // namespace ami
