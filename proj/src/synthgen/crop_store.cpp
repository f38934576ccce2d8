#include "ami/synthgen/crop_store.hpp"

#include <algorithm>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/image_io.hpp"
#include "json.hpp"

namespace ami::synthgen {

using json = nlohmann::json;

namespace {

json load_reviews(const std::filesystem::path& dir) {
  const auto path = dir / "reviews.json";
  if (!std::filesystem::exists(path)) return json::object();
  try {
    return json::parse(fs::read_text(path));
  } catch (const json::exception& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

bool valid_id(const std::string& id) {
  return !id.empty() && id.find('/') == std::string::npos && id.find("..") == std::string::npos;
}

}  // namespace

CropStore::CropStore(std::filesystem::path dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

std::filesystem::path CropStore::image_path(const std::string& id) const { return dir_ / (id + ".png"); }

std::vector<CropInfo> CropStore::list() const {
  std::lock_guard lock(mutex_);
  const json reviews = load_reviews(dir_);
  std::vector<CropInfo> out;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (entry.path().extension() != ".png") continue;
    CropInfo info;
    info.id = entry.path().stem().string();
    if (reviews.contains(info.id)) info.review_state = parse_review_state(reviews[info.id].get<std::string>());
    out.push_back(std::move(info));
  }
  std::sort(out.begin(), out.end(), [](const CropInfo& a, const CropInfo& b) { return a.id < b.id; });
  return out;
}

std::optional<CropInfo> CropStore::get(const std::string& id) const {
  if (!valid_id(id) || !std::filesystem::exists(image_path(id))) return std::nullopt;
  std::lock_guard lock(mutex_);
  const json reviews = load_reviews(dir_);
  CropInfo info;
  info.id = id;
  if (reviews.contains(id)) info.review_state = parse_review_state(reviews[id].get<std::string>());
  const Raster img = read_image(image_path(id));
  info.width = img.width();
  info.height = img.height();
  return info;
}

CropInfo CropStore::set_review_state(const std::string& id, ReviewState state) {
  if (!valid_id(id) || !std::filesystem::exists(image_path(id))) throw NotFoundError("crop " + id + " not found");
  {
    std::lock_guard lock(mutex_);
    fs::FileLock file_lock(dir_ / ".reviews.lock");
    json reviews = load_reviews(dir_);
    reviews[id] = std::string(to_string(state));
    fs::atomic_write(dir_ / "reviews.json", reviews.dump(2) + "\n");
  }
  return *get(id);
}

std::vector<CropAsset> CropStore::load_approved() const {
  std::vector<CropAsset> out;
  for (const CropInfo& info : list()) {
    if (info.review_state != ReviewState::approved) continue;
    out.push_back({read_image(image_path(info.id)), info.id, info.review_state});
  }
  return out;
}

}  // namespace ami::synthgen
