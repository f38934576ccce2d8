#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ami/inference/types.hpp"
#include "ami/kernels/image.hpp"
#include "ami/kernels/matrix.hpp"
#include "ami/taxonomy/backbone.hpp"
#include "json.hpp"

namespace ami::tracking {

using inference::BoundingBox;
using inference::Detection;
using kernels::Matrix;
using taxonomy::TaxonKey;

/// Counted tracks whose detections carry no species data.
inline constexpr TaxonKey kUnclassified = -1;

double iou(const BoundingBox& a, const BoundingBox& b);

class CostWeights {
 public:
  /// Normalizes to sum 1. Throws ConfigurationError for a negative weight or
  /// an all-zero set.
  CostWeights(double iou = 0.25, double size = 0.25, double dist = 0.25, double feat = 0.25);

  double iou() const noexcept { return w_[0]; }
  double size() const noexcept { return w_[1]; }
  double dist() const noexcept { return w_[2]; }
  double feat() const noexcept { return w_[3]; }

 private:
  double w_[4];
};

/// w_iou (1 - IoU) + w_size (1 - min area / max area)
///   + w_dist min(centre distance / image_diag, 1) + w_feat (1 - cos) / 2.
/// A missing feature on either side makes the last term w_feat / 2.
double pairwise_cost(const Detection& a, const Detection& b, const CostWeights& w, double image_diag);

struct Assignment {
  std::vector<std::pair<std::size_t, std::size_t>> matches;  // ascending row
  std::vector<std::size_t> unmatched_rows;
  std::vector<std::size_t> unmatched_cols;
  double total_cost = 0;  // summed in row order
};

/// Gated rectangular linear sum assignment. Entries above `gate` are
/// forbidden. Among assignments with the most matched pairs, returns one of
/// minimum total cost; ties go to the lexicographically smallest
/// row-to-column vector (an unmatched row ranks after every column).
/// Throws InputError for NaN or infinite entries.
Assignment assign(const Matrix& costs, double gate);

struct TrackItem {
  std::size_t frame_index = 0;
  std::size_t detection_index = 0;
  std::optional<double> link_cost;  // absent on the first item
  friend bool operator==(const TrackItem&, const TrackItem&) = default;
};

struct Consensus {
  TaxonKey taxon_key = 0;
  double mean_probability = 0;
  friend bool operator==(const Consensus&, const Consensus&) = default;
};

struct Track {
  std::size_t track_id = 0;
  std::vector<TrackItem> items;
  std::optional<Consensus> consensus;
  friend bool operator==(const Track&, const Track&) = default;
};

struct TrackerConfig {
  CostWeights weights;
  double gate = 0.8;
  double image_diag = 0;  // frame diagonal in pixels; must be positive
  kernels::Execution execution = kernels::Execution::serial;
};

/// Cost matrix between two detection lists.
Matrix cost_matrix(const std::vector<Detection>& prev, const std::vector<Detection>& next, const TrackerConfig& config);

/// Chains consecutive frames. frames[f] holds frame f's moth detections,
/// identified by Detection::index. Track ids follow birth order.
std::vector<Track> track_session(const std::vector<std::vector<Detection>>& frames, const TrackerConfig& config);

/// Argmax of the mean species probability over the detections; a species
/// missing from a detection's list counts as 0 there. Ties go to the smaller
/// key. None when no detection carries species data.
std::optional<Consensus> consensus(const std::vector<const Detection*>& detections);

struct Counts {
  std::map<TaxonKey, std::int64_t> species;
  std::map<TaxonKey, std::int64_t> genus;
  std::map<TaxonKey, std::int64_t> family;
};

/// Tracks per consensus species, rolled up to genus and family. Tracks
/// without consensus are counted under kUnclassified at every level.
Counts count_individuals(const std::vector<Track>& tracks, const taxonomy::Backbone& backbone);

nlohmann::json to_json(const Track& track, const std::string& session_id);
Track track_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Counts& counts);

}  // namespace ami::tracking
