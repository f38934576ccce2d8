#pragma once

#include <memory>
#include <string>
#include <vector>

#include "ami/core/raster.hpp"
#include "ami/inference/types.hpp"
#include "ami/kernels/image.hpp"

namespace ami::inference {

/// Raw backend output for the species stage, before top-k and normalization.
struct SpeciesOutput {
  std::vector<SpeciesScore> distribution;  // in label-map order
  std::vector<double> feature;             // may be empty
};

/// A loaded model. Each backend implements the operations of its stage; the
/// others throw StageError.
class ModelBackend {
 public:
  explicit ModelBackend(ModelSpec spec) : spec_(std::move(spec)) {}
  virtual ~ModelBackend() = default;

  const ModelSpec& spec() const noexcept { return spec_; }
  /// True when one instance may serve several threads at once.
  virtual bool shareable() const noexcept { return true; }

  virtual std::vector<ScoredBox> detect(const Raster& image);
  virtual double moth_probability(const Raster& crop);
  virtual SpeciesOutput species(const Raster& crop);
  virtual LifeStageResult life_stage(const Raster& crop);

 protected:
  [[noreturn]] void unsupported(const char* what) const;

 private:
  ModelSpec spec_;
};

/// Instantiates the backend named by the spec. Load failures (missing file,
/// malformed fixture, unavailable runtime) throw StageError.
std::unique_ptr<ModelBackend> make_backend(const ModelSpec& spec);

struct BlobParams {
  int threshold = 40;  // gray-level difference, out of 255
  int min_area = 100;  // pixels
  kernels::Execution execution = kernels::Execution::parallel;
};

/// Parses "threshold=40;min_area=100;exec=serial". Empty text gives defaults.
BlobParams parse_blob_params(const std::string& text);

/// Classical baseline: gray, median background, absolute difference,
/// threshold, 8-connected components, area filter. Score is
/// min(1, mean difference / (2 * threshold)). Sorted by descending score,
/// then top, then left.
std::vector<ScoredBox> blob_detect(const Raster& image, const BlobParams& params);

/// Taxon keys in model output order, read from a JSON array or an object with
/// a "labels" array.
std::vector<TaxonKey> read_label_map(const std::string& path);

}  // namespace ami::inference
