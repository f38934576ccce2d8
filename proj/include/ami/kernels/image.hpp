#pragma once

// Data-parallel image kernels. Every kernel has a straightforward serial
// reference and an OpenMP version; the two must agree bit for bit, which the
// kernel tests check and bench/ measures.

#include <cstdint>
#include <vector>

#include "ami/core/raster.hpp"

namespace ami::kernels {

enum class Execution { serial, parallel };

GrayImage to_gray_serial(const Raster& image);
GrayImage to_gray_omp(const Raster& image);

/// Lower median of the gray levels: smallest v with count(<= v) >= ceil(n/2).
std::uint8_t median_gray_serial(const GrayImage& gray);
std::uint8_t median_gray_omp(const GrayImage& gray);

/// |gray - background| per pixel, and a 0/1 mask of pixels whose difference
/// is >= threshold.
struct DiffMask {
  std::vector<std::uint8_t> diff;
  std::vector<std::uint8_t> mask;
};
DiffMask threshold_absdiff_serial(const GrayImage& gray, std::uint8_t background, std::uint8_t threshold);
DiffMask threshold_absdiff_omp(const GrayImage& gray, std::uint8_t background, std::uint8_t threshold);

struct Component {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;  // x_max/y_max exclusive
  std::int64_t area = 0;
  std::int64_t diff_sum = 0;
  friend bool operator==(const Component&, const Component&) = default;
};

/// 8-connected components of a 0/1 mask. Labels are 1..n in order of each
/// component's first pixel in raster order; 0 is background.
struct Labeling {
  std::vector<std::int32_t> labels;
  std::vector<Component> components;  // components[k] has label k+1
};
/// Flood-fill reference.
Labeling label_components_serial(const std::vector<std::uint8_t>& mask, const std::vector<std::uint8_t>& diff,
                                 int width, int height);
/// Row strips labelled in parallel with a min-root union-find, then stitched.
Labeling label_components_omp(const std::vector<std::uint8_t>& mask, const std::vector<std::uint8_t>& diff,
                              int width, int height);

inline GrayImage to_gray(const Raster& image, Execution e) {
  return e == Execution::serial ? to_gray_serial(image) : to_gray_omp(image);
}
inline std::uint8_t median_gray(const GrayImage& gray, Execution e) {
  return e == Execution::serial ? median_gray_serial(gray) : median_gray_omp(gray);
}
inline DiffMask threshold_absdiff(const GrayImage& gray, std::uint8_t bg, std::uint8_t t, Execution e) {
  return e == Execution::serial ? threshold_absdiff_serial(gray, bg, t) : threshold_absdiff_omp(gray, bg, t);
}
inline Labeling label_components(const std::vector<std::uint8_t>& mask, const std::vector<std::uint8_t>& diff,
                                 int width, int height, Execution e) {
  return e == Execution::serial ? label_components_serial(mask, diff, width, height)
                                : label_components_omp(mask, diff, width, height);
}

}  // namespace ami::kernels
