#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ami/taxonomy/backbone.hpp"
#include "json.hpp"

namespace ami::inference {

using taxonomy::TaxonKey;

/// Pixel-space box; max edges are exclusive, so a box covering pixel columns
/// 40..59 has x_min 40 and x_max 60.
struct BoundingBox {
  double x_min = 0, y_min = 0, x_max = 0, y_max = 0;

  double width() const noexcept { return x_max - x_min; }
  double height() const noexcept { return y_max - y_min; }
  double area() const noexcept { return width() * height(); }
  double center_x() const noexcept { return 0.5 * (x_min + x_max); }
  double center_y() const noexcept { return 0.5 * (y_min + y_max); }
  bool valid() const noexcept { return x_min < x_max && y_min < y_max; }
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

struct ScoredBox {
  BoundingBox box;
  double score = 0;
  friend bool operator==(const ScoredBox&, const ScoredBox&) = default;
};

enum class BinaryLabel { moth, non_moth };
std::string_view to_string(BinaryLabel label);

struct BinaryResult {
  BinaryLabel label = BinaryLabel::non_moth;
  double score = 0;
  friend bool operator==(const BinaryResult&, const BinaryResult&) = default;
};

struct SpeciesScore {
  TaxonKey taxon_key = 0;
  double probability = 0;
  friend bool operator==(const SpeciesScore&, const SpeciesScore&) = default;
};

struct LifeStageResult {
  std::string label;
  double score = 0;
  friend bool operator==(const LifeStageResult&, const LifeStageResult&) = default;
};

struct Detection {
  std::size_t index = 0;  // position in the detector's output for this image
  BoundingBox box;
  double det_score = 0;
  std::optional<BinaryResult> binary;
  std::optional<std::vector<SpeciesScore>> species;  // non-increasing probability
  std::optional<std::vector<double>> feature;        // unit L2 norm
  std::optional<LifeStageResult> life_stage;
  friend bool operator==(const Detection&, const Detection&) = default;
};

enum class Stage { detector, binary, species, life_stage };
enum class Backend { stub_fixture, blob, external_runtime };

std::string_view to_string(Stage stage);
std::string_view to_string(Backend backend);
Stage parse_stage(std::string_view text);
Backend parse_backend(std::string_view text);

struct ModelSpec {
  Stage stage = Stage::detector;
  Backend backend = Backend::blob;
  std::string model_uri;
  double threshold = 0.5;
  int input_resolution = 128;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Throws ConfigurationError on an out-of-range threshold or resolution.
void validate(const ModelSpec& spec);

/// The per-stage model configuration of one pipeline run.
struct StageSpecs {
  ModelSpec detector{Stage::detector, Backend::blob, "", 0.5, 128};
  ModelSpec binary{Stage::binary, Backend::stub_fixture, "", 0.5, 128};
  std::optional<ModelSpec> species;
  std::optional<ModelSpec> life_stage;
  int top_k = 5;
  friend bool operator==(const StageSpecs&, const StageSpecs&) = default;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const StageSpecs& specs);
StageSpecs stage_specs_from_json(const nlohmann::json& j);

nlohmann::json to_json(const BoundingBox& box);
BoundingBox bounding_box_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Detection& d);
Detection detection_from_json(const nlohmann::json& j);

}  // namespace ami::inference
