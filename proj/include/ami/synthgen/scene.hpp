#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ami/core/raster.hpp"
#include "ami/kernels/image.hpp"

namespace ami::synthgen {

enum class ReviewState { unreviewed, approved, rejected };

std::string_view to_string(ReviewState s);
ReviewState parse_review_state(std::string_view text);

/// An insect cut-out. Alpha >= 128 marks the insect; a fully opaque crop is a
/// plain rectangle.
struct CropAsset {
  Raster image;
  std::string source_id;
  ReviewState review_state = ReviewState::unreviewed;
};

struct PixelBox {
  int x_min = 0, y_min = 0, x_max = 0, y_max = 0;  // max exclusive
  int width() const noexcept { return x_max - x_min; }
  int height() const noexcept { return y_max - y_min; }
  std::int64_t area() const noexcept { return static_cast<std::int64_t>(width()) * height(); }
  friend bool operator==(const PixelBox&, const PixelBox&) = default;
};

double box_iou(const PixelBox& a, const PixelBox& b);

struct SceneAnnotation {
  std::vector<PixelBox> boxes;
  std::vector<std::string> crop_ids;  // parallel to boxes
  friend bool operator==(const SceneAnnotation&, const SceneAnnotation&) = default;
};

struct Augmentation {
  bool hflip = false;
  int rotation = 0;  // degrees clockwise, multiple of 90
};

/// Horizontal flip first, then clockwise rotation.
Raster augment(const Raster& crop, Augmentation aug);

inline constexpr std::uint8_t kMaskAlpha = 128;

struct SceneConfig {
  int n_min = 1;
  int n_max = 8;
  bool allow_overlap = true;
  double max_overlap_iou = 0.0;
  /// Extra gap required between boxes when overlap is not allowed.
  int min_separation_px = 0;
  bool hflip = true;
  std::vector<int> rotations = {0, 90, 180, 270};
  int retries_per_crop = 100;
};

struct Scene {
  Raster image;
  SceneAnnotation annotation;
  std::size_t dropped_crops = 0;  // pastes abandoned after exhausting retries
};

/// Pastes a random number of approved crops onto a copy of `background`.
/// Every recorded box is the exact extent of the pasted mask pixels.
Scene compose_scene(const Raster& background, std::span<const CropAsset> crops, const SceneConfig& config,
                    std::uint64_t seed);

struct SceneRecord {
  std::size_t index = 0;
  std::string file_name;
  int width = 0;
  int height = 0;
  SceneAnnotation annotation;
  std::size_t dropped_crops = 0;
  friend bool operator==(const SceneRecord&, const SceneRecord&) = default;
};

struct DatasetSpec {
  std::size_t n_scenes = 5000;
  SceneConfig scene;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir;  // scenes are written to out_dir/images
};

/// Renders scenes [begin, end). Scene i draws its background and crops from a
/// generator seeded with seed + i, so any split of the index range yields the
/// same scenes. Parallel execution distributes scenes over OpenMP threads.
std::vector<SceneRecord> render_scenes(std::span<const Raster> backgrounds, std::span<const CropAsset> crops,
                                       const DatasetSpec& spec, std::size_t begin, std::size_t end,
                                       kernels::Execution execution = kernels::Execution::parallel);

/// COCO-style annotation document (single category "insect"); bboxes are
/// [x, y, width, height]. Records are ordered by scene index and annotation
/// ids are assigned sequentially, so merged shards match a single run.
std::string coco_json(std::vector<SceneRecord> records);
std::vector<SceneRecord> parse_coco_json(std::string_view text);

/// Renders all scenes and writes out_dir/annotations.json.
std::vector<SceneRecord> generate_dataset(std::span<const Raster> backgrounds, std::span<const CropAsset> crops,
                                          const DatasetSpec& spec,
                                          kernels::Execution execution = kernels::Execution::parallel);

}  // namespace ami::synthgen
