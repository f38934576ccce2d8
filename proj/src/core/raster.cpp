#include "ami/core/raster.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace ami {

Raster::Raster(int width, int height, Rgba fill) : width_(width), height_(height) {
  if (width < 0 || height < 0) throw std::invalid_argument("negative raster size");
  data_.resize(area() * kChannels);
  for (std::size_t i = 0; i < data_.size(); i += kChannels) {
    data_[i] = fill.r;
    data_[i + 1] = fill.g;
    data_[i + 2] = fill.b;
    data_[i + 3] = fill.a;
  }
}

Raster Raster::sub_image(int x0, int y0, int x1, int y1) const {
  if (x0 < 0 || y0 < 0 || x1 > width_ || y1 > height_ || x0 > x1 || y0 > y1)
    throw std::out_of_range("sub_image rectangle outside raster");
  Raster out(x1 - x0, y1 - y0);
  const std::size_t row_bytes = static_cast<std::size_t>(x1 - x0) * kChannels;
  for (int y = y0; y < y1; ++y) {
    std::memcpy(out.data_.data() + out.offset(0, y - y0), data_.data() + offset(x0, y), row_bytes);
  }
  return out;
}

}  // namespace ami
