#pragma once

#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "ami/synthgen/scene.hpp"

namespace ami::synthgen {

struct CropInfo {
  std::string id;
  ReviewState review_state = ReviewState::unreviewed;
  int width = 0;
  int height = 0;
};

/// Directory of crop PNGs (<id>.png) plus reviews.json holding each crop's
/// review state. Review updates are written atomically.
class CropStore {
 public:
  explicit CropStore(std::filesystem::path dir);

  std::vector<CropInfo> list() const;
  std::optional<CropInfo> get(const std::string& id) const;
  /// Throws NotFoundError for an unknown id.
  CropInfo set_review_state(const std::string& id, ReviewState state);
  std::filesystem::path image_path(const std::string& id) const;
  std::vector<CropAsset> load_approved() const;

 private:
  std::filesystem::path dir_;
  mutable std::mutex mutex_;
};

}  // namespace ami::synthgen
