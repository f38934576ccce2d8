#include "ami/inference/backends.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/hash.hpp"

namespace ami::inference {

using json = nlohmann::json;

std::vector<ScoredBox> ModelBackend::detect(const Raster&) { unsupported("detection"); }
double ModelBackend::moth_probability(const Raster&) { unsupported("binary classification"); }
SpeciesOutput ModelBackend::species(const Raster&) { unsupported("species classification"); }
LifeStageResult ModelBackend::life_stage(const Raster&) { unsupported("life-stage classification"); }

void ModelBackend::unsupported(const char* what) const {
  throw StageError(std::string(to_string(spec_.backend)) + " backend configured for stage " +
                       std::string(to_string(spec_.stage)) + " cannot perform " + what,
                   spec_.model_uri);
}

BlobParams parse_blob_params(const std::string& text) {
  BlobParams p;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find(';', pos);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(pos, end - pos);
    pos = end + 1;
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigurationError("blob parameter '" + item + "' lacks '='");
    const std::string key = item.substr(0, eq), value = item.substr(eq + 1);
    if (key == "exec") {
      if (value == "serial") p.execution = kernels::Execution::serial;
      else if (value == "parallel" || value == "omp") p.execution = kernels::Execution::parallel;
      else throw ConfigurationError("blob exec must be serial or parallel");
      continue;
    }
    int v = 0;
    const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
    if (ec != std::errc() || ptr != value.data() + value.size())
      throw ConfigurationError("blob parameter '" + key + "' is not an integer");
    if (key == "threshold") {
      if (v < 1 || v > 255) throw ConfigurationError("blob threshold must lie in [1,255]");
      p.threshold = v;
    } else if (key == "min_area") {
      if (v < 1) throw ConfigurationError("blob min_area must be positive");
      p.min_area = v;
    } else {
      throw ConfigurationError("unknown blob parameter '" + key + "'");
    }
  }
  return p;
}

std::vector<ScoredBox> blob_detect(const Raster& image, const BlobParams& params) {
  if (image.empty()) return {};
  const auto exec = params.execution;
  const GrayImage gray = kernels::to_gray(image, exec);
  const std::uint8_t bg = kernels::median_gray(gray, exec);
  const auto dm = kernels::threshold_absdiff(gray, bg, static_cast<std::uint8_t>(params.threshold), exec);
  const auto labeling = kernels::label_components(dm.mask, dm.diff, gray.width, gray.height, exec);
  std::vector<ScoredBox> out;
  for (const auto& c : labeling.components) {
    if (c.area < params.min_area) continue;
    const double mean = static_cast<double>(c.diff_sum) / static_cast<double>(c.area);
    out.push_back({{double(c.x_min), double(c.y_min), double(c.x_max), double(c.y_max)},
                   std::min(1.0, mean / (2.0 * params.threshold))});
  }
  std::sort(out.begin(), out.end(), [](const ScoredBox& a, const ScoredBox& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.box.y_min != b.box.y_min) return a.box.y_min < b.box.y_min;
    return a.box.x_min < b.box.x_min;
  });
  return out;
}

std::vector<TaxonKey> read_label_map(const std::string& path) {
  json doc;
  try {
    doc = json::parse(fs::read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  const json& arr = doc.is_object() ? doc.at("labels") : doc;
  if (!arr.is_array()) throw ParseError(path + ": label map must be an array of taxon keys");
  std::vector<TaxonKey> keys;
  for (const auto& v : arr) keys.push_back(v.get<TaxonKey>());
  return keys;
}

namespace {

class BlobBackend final : public ModelBackend {
 public:
  explicit BlobBackend(const ModelSpec& spec) : ModelBackend(spec), params_(parse_blob_params(spec.model_uri)) {}
  std::vector<ScoredBox> detect(const Raster& image) override { return blob_detect(image, params_); }

 private:
  BlobParams params_;
};

/// Canned outputs from a JSON file, keyed by raster_digest of the input (the
/// full image for the detector, the prepared crop for classifiers). A "*"
/// entry answers any input without its own entry.
class StubFixtureBackend final : public ModelBackend {
 public:
  explicit StubFixtureBackend(const ModelSpec& spec) : ModelBackend(spec) {
    try {
      doc_ = json::parse(fs::read_text(spec.model_uri));
    } catch (const Error& e) {
      throw StageError(std::string("cannot load fixture: ") + e.what(), spec.model_uri);
    } catch (const json::exception& e) {
      throw StageError(std::string("malformed fixture: ") + e.what(), spec.model_uri);
    }
    const char* section = nullptr;
    switch (spec.stage) {
      case Stage::detector: section = "detector"; break;
      case Stage::binary: section = "binary"; break;
      case Stage::species: section = "species"; break;
      case Stage::life_stage: section = "life_stage"; break;
    }
    if (!doc_.contains(section) || !doc_[section].is_object())
      throw StageError(std::string("fixture has no '") + section + "' section", spec.model_uri);
    section_ = doc_[section];
    if (spec.stage == Stage::species && section_.contains("labels"))
      labels_ = section_["labels"].get<std::vector<TaxonKey>>();
  }

  std::vector<ScoredBox> detect(const Raster& image) override {
    std::vector<ScoredBox> out;
    try {
      for (const auto& b : entry(image)) out.push_back({bounding_box_from_json(b.at("box")), b.at("score").get<double>()});
    } catch (const json::exception& e) {
      throw StageError(std::string("malformed detector entry: ") + e.what(), spec().model_uri);
    }
    return out;
  }

  double moth_probability(const Raster& crop) override {
    const json& e = entry(crop);
    if (!e.is_number()) throw StageError("binary fixture entry must be a probability", spec().model_uri);
    return e.get<double>();
  }

  SpeciesOutput species(const Raster& crop) override {
    const json& e = entry(crop);
    SpeciesOutput out;
    try {
      if (e.contains("probs")) {
        const auto probs = e["probs"].get<std::vector<double>>();
        if (probs.size() != labels_.size())
          throw StageError("species output has " + std::to_string(probs.size()) + " scores but the label map has " +
                               std::to_string(labels_.size()),
                           spec().model_uri);
        for (std::size_t i = 0; i < probs.size(); ++i) out.distribution.push_back({labels_[i], probs[i]});
      } else {
        for (const auto& [k, p] : e.at("distribution").items()) out.distribution.push_back({std::stoll(k), p.get<double>()});
      }
      if (e.contains("feature")) out.feature = e["feature"].get<std::vector<double>>();
    } catch (const json::exception& ex) {
      throw StageError(std::string("malformed species entry: ") + ex.what(), spec().model_uri);
    }
    return out;
  }

  LifeStageResult life_stage(const Raster& crop) override {
    const json& e = entry(crop);
    try {
      return {e.at("label").get<std::string>(), e.at("score").get<double>()};
    } catch (const json::exception& ex) {
      throw StageError(std::string("malformed life_stage entry: ") + ex.what(), spec().model_uri);
    }
  }

 private:
  const json& entry(const Raster& input) const {
    const std::string key = raster_digest(input);
    if (section_.contains(key)) return section_[key];
    if (section_.contains("*")) return section_["*"];
    throw StageError("fixture has no response for input " + key, spec().model_uri);
  }

  json doc_;
  json section_;
  std::vector<TaxonKey> labels_;
};

/// Interchange-format models need an inference runtime, which this build does
/// not link. The model file and label map are still validated so that
/// configuration mistakes surface before the runtime is missed.
class ExternalRuntimeBackend final : public ModelBackend {
 public:
  explicit ExternalRuntimeBackend(const ModelSpec& spec) : ModelBackend(spec) {
    if (!std::filesystem::exists(spec.model_uri)) throw StageError("model file not found", spec.model_uri);
    if (spec.stage == Stage::species) {
      const std::string sidecar = spec.model_uri + ".labels.json";
      if (!std::filesystem::exists(sidecar)) throw StageError("label map " + sidecar + " not found", spec.model_uri);
      try {
        read_label_map(sidecar);
      } catch (const Error& e) {
        throw StageError(e.what(), spec.model_uri);
      }
    }
    throw StageError("external_runtime backend is unavailable in this build (no inference runtime linked)",
                     spec.model_uri);
  }
};

}  // namespace

std::unique_ptr<ModelBackend> make_backend(const ModelSpec& spec) {
  validate(spec);
  switch (spec.backend) {
    case Backend::blob: return std::make_unique<BlobBackend>(spec);
    case Backend::stub_fixture: return std::make_unique<StubFixtureBackend>(spec);
    case Backend::external_runtime: return std::make_unique<ExternalRuntimeBackend>(spec);
  }
  throw ConfigurationError("unknown backend");
}

}  // namespace ami::inference
