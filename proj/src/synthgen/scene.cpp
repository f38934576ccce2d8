#include "ami/synthgen/scene.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <mutex>
#include <random>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/image_io.hpp"
#include "json.hpp"

namespace ami::synthgen {

using json = nlohmann::json;

std::string_view to_string(ReviewState s) {
  switch (s) {
    case ReviewState::unreviewed: return "unreviewed";
    case ReviewState::approved: return "approved";
    case ReviewState::rejected: return "rejected";
  }
  return "?";
}

ReviewState parse_review_state(std::string_view text) {
  if (text == "unreviewed") return ReviewState::unreviewed;
  if (text == "approved") return ReviewState::approved;
  if (text == "rejected") return ReviewState::rejected;
  throw InputError("unknown review_state '" + std::string(text) + "'");
}

double box_iou(const PixelBox& a, const PixelBox& b) {
  const int iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const int ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const std::int64_t inter = static_cast<std::int64_t>(iw) * ih;
  return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

Raster augment(const Raster& crop, Augmentation aug) {
  const int w = crop.width(), h = crop.height();
  Raster flipped = crop;
  if (aug.hflip) {
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) flipped.set(x, y, crop.at(w - 1 - x, y));
  }
  const int rot = ((aug.rotation % 360) + 360) % 360;
  switch (rot) {
    case 0: return flipped;
    case 90: {
      Raster out(h, w);
      for (int y = 0; y < w; ++y)
        for (int x = 0; x < h; ++x) out.set(x, y, flipped.at(y, h - 1 - x));
      return out;
    }
    case 180: {
      Raster out(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out.set(x, y, flipped.at(w - 1 - x, h - 1 - y));
      return out;
    }
    case 270: {
      Raster out(h, w);
      for (int y = 0; y < w; ++y)
        for (int x = 0; x < h; ++x) out.set(x, y, flipped.at(w - 1 - y, x));
      return out;
    }
    default: throw ConfigurationError("rotation must be a multiple of 90 degrees, got " + std::to_string(aug.rotation));
  }
}

namespace {

std::optional<PixelBox> mask_extent(const Raster& img) {
  PixelBox b{img.width(), img.height(), 0, 0};
  bool any = false;
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      if (img.at(x, y).a < kMaskAlpha) continue;
      any = true;
      b.x_min = std::min(b.x_min, x);
      b.y_min = std::min(b.y_min, y);
      b.x_max = std::max(b.x_max, x + 1);
      b.y_max = std::max(b.y_max, y + 1);
    }
  }
  if (!any) return std::nullopt;
  return b;
}

bool placement_ok(const PixelBox& candidate, const std::vector<PixelBox>& placed, const SceneConfig& cfg) {
  for (const PixelBox& b : placed) {
    if (box_iou(candidate, b) > cfg.max_overlap_iou) return false;
    if (cfg.min_separation_px > 0) {
      const int sep = cfg.min_separation_px;
      const bool apart = candidate.x_min >= b.x_max + sep || b.x_min >= candidate.x_max + sep ||
                         candidate.y_min >= b.y_max + sep || b.y_min >= candidate.y_max + sep;
      if (!apart) return false;
    }
  }
  return true;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

}  // namespace

Scene compose_scene(const Raster& background, std::span<const CropAsset> crops, const SceneConfig& cfg,
                    std::uint64_t seed) {
  if (cfg.n_min < 0 || cfg.n_max < cfg.n_min) throw ConfigurationError("n_range must satisfy 0 <= min <= max");
  if (cfg.max_overlap_iou < 0.0 || cfg.max_overlap_iou > 1.0)
    throw ConfigurationError("max_overlap_iou must lie in [0,1]");
  std::vector<Augmentation> augs;
  const std::vector<int> rotations = cfg.rotations.empty() ? std::vector<int>{0} : cfg.rotations;
  for (bool flip : cfg.hflip ? std::vector<bool>{false, true} : std::vector<bool>{false}) {
    for (int rot : rotations) {
      if (rot != 0 && rot != 90 && rot != 180 && rot != 270)
        throw ConfigurationError("rotations must be drawn from {0, 90, 180, 270}");
      augs.push_back({flip, rot});
    }
  }
  const bool swaps = std::any_of(rotations.begin(), rotations.end(), [](int r) { return r == 90 || r == 270; });

  std::vector<std::size_t> approved;
  for (std::size_t i = 0; i < crops.size(); ++i) {
    if (crops[i].review_state != ReviewState::approved) continue;
    const Raster& img = crops[i].image;
    if (img.empty()) throw ConfigurationError("crop " + crops[i].source_id + " has zero area");
    const bool fits = img.width() <= background.width() && img.height() <= background.height() &&
                      (!swaps || (img.height() <= background.width() && img.width() <= background.height()));
    if (!fits)
      throw ConfigurationError("crop " + crops[i].source_id + " (" + std::to_string(img.width()) + "x" +
                               std::to_string(img.height()) + ") does not fit the background");
    approved.push_back(i);
  }

  std::mt19937_64 rng(seed);
  const int n = std::uniform_int_distribution<int>(cfg.n_min, cfg.n_max)(rng);
  Scene scene{background, {}, 0};
  if (n == 0) return scene;
  if (approved.empty()) throw ConfigurationError("no approved crops to paste");

  std::uniform_int_distribution<std::size_t> pick_crop(0, approved.size() - 1);
  std::uniform_int_distribution<std::size_t> pick_aug(0, augs.size() - 1);
  for (int k = 0; k < n; ++k) {
    const CropAsset& crop = crops[approved[pick_crop(rng)]];
    const Raster img = augment(crop.image, augs[pick_aug(rng)]);
    const auto extent = mask_extent(img);
    if (!extent) throw ConfigurationError("crop " + crop.source_id + " has an empty alpha mask");
    std::uniform_int_distribution<int> pick_x(0, background.width() - img.width());
    std::uniform_int_distribution<int> pick_y(0, background.height() - img.height());
    const int tries = cfg.allow_overlap ? 1 : std::max(1, cfg.retries_per_crop);
    std::optional<PixelBox> placed;
    int px = 0, py = 0;
    for (int t = 0; t < tries && !placed; ++t) {
      px = pick_x(rng);
      py = pick_y(rng);
      const PixelBox box{px + extent->x_min, py + extent->y_min, px + extent->x_max, py + extent->y_max};
      if (cfg.allow_overlap || placement_ok(box, scene.annotation.boxes, cfg)) placed = box;
    }
    if (!placed) {
      ++scene.dropped_crops;
      continue;
    }
    for (int y = 0; y < img.height(); ++y) {
      for (int x = 0; x < img.width(); ++x) {
        const Rgba c = img.at(x, y);
        if (c.a >= kMaskAlpha) scene.image.set(px + x, py + y, {c.r, c.g, c.b, 255});
      }
    }
    scene.annotation.boxes.push_back(*placed);
    scene.annotation.crop_ids.push_back(crop.source_id);
  }
  return scene;
}

namespace {

std::string scene_file_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%06zu.png", index);
  return buf;
}

SceneRecord render_one(std::span<const Raster> backgrounds, std::span<const CropAsset> crops, const DatasetSpec& spec,
                       std::size_t index) {
  const std::uint64_t scene_seed = spec.seed + index;
  const Raster& bg = backgrounds[splitmix64(scene_seed) % backgrounds.size()];
  Scene scene = compose_scene(bg, crops, spec.scene, scene_seed);
  SceneRecord rec{index, scene_file_name(index), scene.image.width(), scene.image.height(),
                  std::move(scene.annotation), scene.dropped_crops};
  if (!spec.out_dir.empty()) write_png(spec.out_dir / "images" / rec.file_name, scene.image);
  return rec;
}

}  // namespace

std::vector<SceneRecord> render_scenes(std::span<const Raster> backgrounds, std::span<const CropAsset> crops,
                                       const DatasetSpec& spec, std::size_t begin, std::size_t end,
                                       kernels::Execution execution) {
  if (backgrounds.empty()) throw ConfigurationError("at least one background image is required");
  if (end < begin) throw ConfigurationError("scene range end precedes begin");
  if (!spec.out_dir.empty()) std::filesystem::create_directories(spec.out_dir / "images");
  std::vector<SceneRecord> out(end - begin);
  if (execution == kernels::Execution::serial) {
    for (std::size_t i = begin; i < end; ++i) out[i - begin] = render_one(backgrounds, crops, spec, i);
    return out;
  }
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto count = static_cast<long long>(end - begin);
#pragma omp parallel for schedule(dynamic)
  for (long long k = 0; k < count; ++k) {
    try {
      out[static_cast<std::size_t>(k)] = render_one(backgrounds, crops, spec, begin + static_cast<std::size_t>(k));
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

std::string coco_json(std::vector<SceneRecord> records) {
  std::sort(records.begin(), records.end(),
            [](const SceneRecord& a, const SceneRecord& b) { return a.index < b.index; });
  json images = json::array();
  json annotations = json::array();
  std::int64_t next_id = 1;
  for (const SceneRecord& r : records) {
    images.push_back({{"id", r.index + 1},
                      {"file_name", r.file_name},
                      {"width", r.width},
                      {"height", r.height},
                      {"dropped_crops", r.dropped_crops}});
    for (std::size_t k = 0; k < r.annotation.boxes.size(); ++k) {
      const PixelBox& b = r.annotation.boxes[k];
      annotations.push_back({{"id", next_id++},
                             {"image_id", r.index + 1},
                             {"category_id", 1},
                             {"bbox", {b.x_min, b.y_min, b.width(), b.height()}},
                             {"area", b.area()},
                             {"iscrowd", 0},
                             {"crop_id", r.annotation.crop_ids[k]}});
    }
  }
  json doc = {{"images", std::move(images)},
              {"annotations", std::move(annotations)},
              {"categories", json::array({{{"id", 1}, {"name", "insect"}, {"supercategory", "animal"}}})}};
  return doc.dump() + "\n";
}

std::vector<SceneRecord> parse_coco_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("annotation file: ") + e.what());
  }
  std::vector<SceneRecord> out;
  std::map<std::int64_t, std::size_t> slot;
  for (const auto& im : doc.at("images")) {
    SceneRecord r;
    r.index = im.at("id").get<std::size_t>() - 1;
    r.file_name = im.at("file_name").get<std::string>();
    r.width = im.at("width").get<int>();
    r.height = im.at("height").get<int>();
    r.dropped_crops = im.value("dropped_crops", std::size_t{0});
    slot[im.at("id").get<std::int64_t>()] = out.size();
    out.push_back(std::move(r));
  }
  for (const auto& a : doc.at("annotations")) {
    const auto it = slot.find(a.at("image_id").get<std::int64_t>());
    if (it == slot.end()) throw ParseError("annotation refers to unknown image");
    const auto& bb = a.at("bbox");
    const int x = bb.at(0).get<int>(), y = bb.at(1).get<int>();
    SceneRecord& r = out[it->second];
    r.annotation.boxes.push_back({x, y, x + bb.at(2).get<int>(), y + bb.at(3).get<int>()});
    r.annotation.crop_ids.push_back(a.value("crop_id", ""));
  }
  return out;
}

std::vector<SceneRecord> generate_dataset(std::span<const Raster> backgrounds, std::span<const CropAsset> crops,
                                          const DatasetSpec& spec, kernels::Execution execution) {
  if (std::none_of(crops.begin(), crops.end(),
                   [](const CropAsset& c) { return c.review_state == ReviewState::approved; }))
    throw ConfigurationError("at least one approved crop is required");
  auto records = render_scenes(backgrounds, crops, spec, 0, spec.n_scenes, execution);
  if (!spec.out_dir.empty()) fs::atomic_write(spec.out_dir / "annotations.json", coco_json(records));
  return records;
}

}  // namespace ami::synthgen
