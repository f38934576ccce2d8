#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ami/core/raster.hpp"
#include "ami/inference/backends.hpp"
#include "ami/inference/types.hpp"

namespace ami::inference {

/// Maps a crop pixel edge coordinate u to source coordinate offset + u * scale.
struct CropTransform {
  double offset_x = 0, offset_y = 0;
  double scale = 1;
  BoundingBox to_source(const BoundingBox& crop_box) const noexcept {
    return {offset_x + crop_box.x_min * scale, offset_y + crop_box.y_min * scale,
            offset_x + crop_box.x_max * scale, offset_y + crop_box.y_max * scale};
  }
};

struct PreparedCrop {
  Raster image;
  CropTransform transform;
};

/// Clamps the box to the image, pads it to a centred square with edge
/// replication, and bilinearly resizes the square to resolution x resolution.
PreparedCrop prepare_crop(const Raster& image, const BoundingBox& box, int resolution);

std::vector<ScoredBox> detect(const Raster& image, ModelBackend& backend);
BinaryResult classify_binary(const Raster& crop, ModelBackend& backend);

struct SpeciesPrediction {
  std::vector<SpeciesScore> top_k;
  std::optional<std::vector<double>> feature;
};
SpeciesPrediction classify_species(const Raster& crop, ModelBackend& backend, int k);

/// Backends for one StageSpecs, loaded once and reused across images.
class StageBackends {
 public:
  explicit StageBackends(const StageSpecs& specs);

  const StageSpecs& specs() const noexcept { return specs_; }
  ModelBackend& detector() { return *detector_; }
  ModelBackend& binary() { return *binary_; }
  ModelBackend* species() { return species_.get(); }
  ModelBackend* life_stage() { return life_stage_.get(); }

 private:
  StageSpecs specs_;
  std::unique_ptr<ModelBackend> detector_, binary_, species_, life_stage_;
};

/// detect → crop → binary → species (moths only) → life stage (moths only).
std::vector<Detection> run_stages(const Raster& image, StageBackends& backends);
std::vector<Detection> run_stages(const Raster& image, const StageSpecs& specs);

/// Static training configuration for the species classifier, as a JSON
/// document. Nothing in the engine trains; this is emitted for external use.
std::string training_recipe_json();

}  // namespace ami::inference
