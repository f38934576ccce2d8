#include "ami/inference/stages.hpp"

#include <algorithm>
#include <cmath>

#include "ami/core/error.hpp"

namespace ami::inference {

using json = nlohmann::json;

PreparedCrop prepare_crop(const Raster& image, const BoundingBox& box, int resolution) {
  if (image.empty()) throw InputError("cannot crop an empty image");
  if (resolution <= 0) throw ConfigurationError("crop resolution must be positive");
  if (!std::isfinite(box.x_min) || !std::isfinite(box.y_min) || !std::isfinite(box.x_max) ||
      !std::isfinite(box.y_max))
    throw InputError("crop box has non-finite coordinates");
  const int w_img = image.width(), h_img = image.height();
  auto clamp_floor = [](double v, int hi) { return std::clamp(static_cast<int>(std::floor(v)), 0, hi); };
  auto clamp_ceil = [](double v, int hi) { return std::clamp(static_cast<int>(std::ceil(v)), 0, hi); };
  int x0 = clamp_floor(box.x_min, w_img - 1), y0 = clamp_floor(box.y_min, h_img - 1);
  int x1 = std::max(clamp_ceil(box.x_max, w_img), x0 + 1), y1 = std::max(clamp_ceil(box.y_max, h_img), y0 + 1);
  const int w = x1 - x0, h = y1 - y0;
  const int side = std::max(w, h);
  const int sx = x0 - (side - w) / 2, sy = y0 - (side - h) / 2;
  const double step = static_cast<double>(side) / resolution;

  Raster out(resolution, resolution);
  for (int v = 0; v < resolution; ++v) {
    const double fy = std::clamp(sy + (v + 0.5) * step - 0.5, double(y0), double(y1 - 1));
    const int ya = static_cast<int>(std::floor(fy));
    const int yb = std::min(ya + 1, y1 - 1);
    const double ty = fy - ya;
    for (int u = 0; u < resolution; ++u) {
      const double fx = std::clamp(sx + (u + 0.5) * step - 0.5, double(x0), double(x1 - 1));
      const int xa = static_cast<int>(std::floor(fx));
      const int xb = std::min(xa + 1, x1 - 1);
      const double tx = fx - xa;
      const Rgba p00 = image.at(xa, ya), p10 = image.at(xb, ya), p01 = image.at(xa, yb), p11 = image.at(xb, yb);
      auto mix = [&](std::uint8_t a, std::uint8_t b, std::uint8_t c, std::uint8_t d) {
        const double top = a + (b - a) * tx, bottom = c + (d - c) * tx;
        return static_cast<std::uint8_t>(std::lround(top + (bottom - top) * ty));
      };
      out.set(u, v, {mix(p00.r, p10.r, p01.r, p11.r), mix(p00.g, p10.g, p01.g, p11.g),
                     mix(p00.b, p10.b, p01.b, p11.b), mix(p00.a, p10.a, p01.a, p11.a)});
    }
  }
  return {std::move(out), {double(sx), double(sy), step}};
}

std::vector<ScoredBox> detect(const Raster& image, ModelBackend& backend) {
  const ModelSpec& spec = backend.spec();
  if (spec.stage != Stage::detector) throw ConfigurationError("detect requires a detector spec");
  std::vector<ScoredBox> out;
  for (ScoredBox sb : backend.detect(image)) {
    if (!std::isfinite(sb.score) || sb.score < 0.0 || sb.score > 1.0)
      throw StageError("detector returned a score outside [0,1]", spec.model_uri);
    sb.box.x_min = std::clamp(sb.box.x_min, 0.0, double(image.width()));
    sb.box.x_max = std::clamp(sb.box.x_max, 0.0, double(image.width()));
    sb.box.y_min = std::clamp(sb.box.y_min, 0.0, double(image.height()));
    sb.box.y_max = std::clamp(sb.box.y_max, 0.0, double(image.height()));
    if (!sb.box.valid() || sb.score < spec.threshold) continue;
    out.push_back(sb);
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredBox& a, const ScoredBox& b) { return a.score > b.score; });
  return out;
}

BinaryResult classify_binary(const Raster& crop, ModelBackend& backend) {
  const ModelSpec& spec = backend.spec();
  if (spec.stage != Stage::binary) throw ConfigurationError("classify_binary requires a binary spec");
  const double p = backend.moth_probability(crop);
  if (!(p >= 0.0 && p <= 1.0)) throw StageError("binary classifier returned a probability outside [0,1]", spec.model_uri);
  if (p >= spec.threshold) return {BinaryLabel::moth, p};
  return {BinaryLabel::non_moth, 1.0 - p};
}

SpeciesPrediction classify_species(const Raster& crop, ModelBackend& backend, int k) {
  const ModelSpec& spec = backend.spec();
  if (spec.stage != Stage::species) throw ConfigurationError("classify_species requires a species spec");
  if (k < 1) throw InputError("k must be at least 1");
  SpeciesOutput raw = backend.species(crop);
  double total = 0;
  for (const auto& s : raw.distribution) {
    if (!(s.probability >= 0.0 && s.probability <= 1.0))
      throw StageError("species classifier returned a probability outside [0,1]", spec.model_uri);
    total += s.probability;
  }
  if (total > 1.0 + 1e-6) throw StageError("species probabilities sum to more than 1", spec.model_uri);
  std::sort(raw.distribution.begin(), raw.distribution.end(), [](const SpeciesScore& a, const SpeciesScore& b) {
    if (a.probability != b.probability) return a.probability > b.probability;
    return a.taxon_key < b.taxon_key;
  });
  SpeciesPrediction out;
  const auto keep = std::min<std::size_t>(static_cast<std::size_t>(k), raw.distribution.size());
  out.top_k.assign(raw.distribution.begin(), raw.distribution.begin() + static_cast<std::ptrdiff_t>(keep));
  double norm2 = 0;
  for (double v : raw.feature) {
    if (!std::isfinite(v)) throw StageError("species feature has non-finite values", spec.model_uri);
    norm2 += v * v;
  }
  if (norm2 > 0) {
    const double norm = std::sqrt(norm2);
    for (double& v : raw.feature) v /= norm;
    out.feature = std::move(raw.feature);
  }
  return out;
}

StageBackends::StageBackends(const StageSpecs& specs) : specs_(specs) {
  if (specs.top_k < 1) throw ConfigurationError("top_k must be at least 1");
  detector_ = make_backend(specs.detector);
  binary_ = make_backend(specs.binary);
  if (specs.species) species_ = make_backend(*specs.species);
  if (specs.life_stage) life_stage_ = make_backend(*specs.life_stage);
}

std::vector<Detection> run_stages(const Raster& image, StageBackends& backends) {
  const StageSpecs& specs = backends.specs();
  std::vector<Detection> out;
  const auto boxes = detect(image, backends.detector());
  for (std::size_t i = 0; i < boxes.size(); ++i) {
    Detection d;
    d.index = i;
    d.box = boxes[i].box;
    d.det_score = boxes[i].score;
    const PreparedCrop crop = prepare_crop(image, d.box, specs.binary.input_resolution);
    d.binary = classify_binary(crop.image, backends.binary());
    if (d.binary->label == BinaryLabel::moth) {
      if (ModelBackend* sp = backends.species()) {
        const int res = specs.species->input_resolution;
        const Raster species_crop =
            res == specs.binary.input_resolution ? crop.image : prepare_crop(image, d.box, res).image;
        SpeciesPrediction pred = classify_species(species_crop, *sp, specs.top_k);
        d.species = std::move(pred.top_k);
        d.feature = std::move(pred.feature);
      }
      if (ModelBackend* ls = backends.life_stage()) {
        const int res = specs.life_stage->input_resolution;
        const Raster ls_crop = res == specs.binary.input_resolution ? crop.image : prepare_crop(image, d.box, res).image;
        d.life_stage = ls->life_stage(ls_crop);
      }
    }
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<Detection> run_stages(const Raster& image, const StageSpecs& specs) {
  StageBackends backends(specs);
  return run_stages(image, backends);
}

std::string training_recipe_json() {
  const json recipe = {
      {"task", "fine-grained moth species classification"},
      {"architecture", "resnet50"},
      {"pretrained", "imagenet-1k"},
      {"input_resolution", {128, 128}},
      {"optimizer", "adamw"},
      {"learning_rate", 0.001},
      {"lr_schedule", "cosine"},
      {"warmup_epochs", 2},
      {"epochs", 30},
      {"weight_decay", 1e-5},
      {"randaugment", {{"n", 2}, {"m", 9}}},
      {"label_smoothing", 0.1},
      {"augmentations", {"random_crop", "random_horizontal_flip", "randaugment", "mixed_resolution"}},
      {"max_images_per_species", 1000},
  };
  return recipe.dump(2) + "\n";
}

}  // namespace ami::inference
