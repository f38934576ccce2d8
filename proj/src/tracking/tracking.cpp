#include "ami/tracking/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ami/core/error.hpp"

namespace ami::tracking {

using json = nlohmann::json;

double iou(const BoundingBox& a, const BoundingBox& b) {
  const double iw = std::min(a.x_max, b.x_max) - std::max(a.x_min, b.x_min);
  const double ih = std::min(a.y_max, b.y_max) - std::max(a.y_min, b.y_min);
  if (iw <= 0 || ih <= 0) return 0.0;
  const double inter = iw * ih;
  const double uni = a.area() + b.area() - inter;
  return uni > 0 ? std::min(1.0, inter / uni) : 0.0;
}

CostWeights::CostWeights(double iou, double size, double dist, double feat) : w_{iou, size, dist, feat} {
  double sum = 0;
  for (double w : w_) {
    if (!(w >= 0) || !std::isfinite(w)) throw ConfigurationError("cost weights must be finite and non-negative");
    sum += w;
  }
  if (sum <= 0) throw ConfigurationError("cost weights must not all be zero");
  for (double& w : w_) w /= sum;
}

namespace {

double feature_term(const Detection& a, const Detection& b) {
  if (!a.feature || !b.feature || a.feature->empty() || b.feature->empty()) return 0.5;
  const auto& fa = *a.feature;
  const auto& fb = *b.feature;
  if (fa.size() != fb.size()) throw InputError("feature vectors differ in dimension");
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < fa.size(); ++i) {
    dot += fa[i] * fb[i];
    na += fa[i] * fa[i];
    nb += fb[i] * fb[i];
  }
  if (na <= 0 || nb <= 0) return 0.5;
  const double cos = std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
  return (1.0 - cos) / 2.0;
}

}  // namespace

double pairwise_cost(const Detection& a, const Detection& b, const CostWeights& w, double image_diag) {
  if (!(image_diag > 0) || !std::isfinite(image_diag)) throw InputError("image diagonal must be positive");
  const double area_a = a.box.area(), area_b = b.box.area();
  if (!(area_a > 0) || !(area_b > 0)) throw InputError("zero-area box in cost computation");
  const double size_term = 1.0 - std::min(area_a, area_b) / std::max(area_a, area_b);
  const double dist = std::hypot(a.box.center_x() - b.box.center_x(), a.box.center_y() - b.box.center_y());
  const double cost = w.iou() * (1.0 - iou(a.box, b.box)) + w.size() * size_term +
                      w.dist() * std::min(dist / image_diag, 1.0) + w.feat() * feature_term(a, b);
  return std::clamp(cost, 0.0, 1.0);
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Square assignment by shortest augmenting paths. `cost` entries of +inf are
// forbidden; a perfect matching over the finite entries must exist.
struct SquareSolution {
  std::vector<std::ptrdiff_t> col4row;
  std::vector<std::ptrdiff_t> row4col;
  std::vector<double> u, v;
};

SquareSolution solve_square(const std::vector<double>& cost, std::size_t n) {
  SquareSolution s;
  s.col4row.assign(n, -1);
  s.row4col.assign(n, -1);
  s.u.assign(n, 0.0);
  s.v.assign(n, 0.0);
  std::vector<double> shortest(n);
  std::vector<std::ptrdiff_t> path(n);
  std::vector<std::size_t> remaining(n);
  std::vector<char> sr(n), sc(n);

  for (std::size_t cur = 0; cur < n; ++cur) {
    double min_val = 0;
    std::size_t num_remaining = n;
    for (std::size_t it = 0; it < n; ++it) remaining[it] = n - it - 1;
    std::fill(sr.begin(), sr.end(), 0);
    std::fill(sc.begin(), sc.end(), 0);
    std::fill(shortest.begin(), shortest.end(), kInf);
    std::ptrdiff_t sink = -1;
    std::size_t i = cur;
    while (sink == -1) {
      std::ptrdiff_t index = -1;
      double lowest = kInf;
      sr[i] = 1;
      for (std::size_t it = 0; it < num_remaining; ++it) {
        const std::size_t j = remaining[it];
        const double c = cost[i * n + j];
        if (c != kInf) {
          const double r = min_val + c - s.u[i] - s.v[j];
          if (r < shortest[j]) {
            path[j] = static_cast<std::ptrdiff_t>(i);
            shortest[j] = r;
          }
        }
        if (shortest[j] < lowest || (shortest[j] == lowest && lowest != kInf && s.row4col[j] == -1)) {
          lowest = shortest[j];
          index = static_cast<std::ptrdiff_t>(it);
        }
      }
      min_val = lowest;
      if (index < 0 || min_val == kInf) throw InputError("assignment problem is infeasible");
      const std::size_t j = remaining[static_cast<std::size_t>(index)];
      if (s.row4col[j] == -1) sink = static_cast<std::ptrdiff_t>(j);
      else i = static_cast<std::size_t>(s.row4col[j]);
      sc[j] = 1;
      remaining[static_cast<std::size_t>(index)] = remaining[--num_remaining];
    }
    s.u[cur] += min_val;
    for (std::size_t r = 0; r < n; ++r)
      if (sr[r] && r != cur) s.u[r] += min_val - shortest[static_cast<std::size_t>(s.col4row[r])];
    for (std::size_t c = 0; c < n; ++c)
      if (sc[c]) s.v[c] -= min_val - shortest[c];
    std::size_t j = static_cast<std::size_t>(sink);
    while (true) {
      const std::size_t r = static_cast<std::size_t>(path[j]);
      s.row4col[j] = static_cast<std::ptrdiff_t>(r);
      const std::ptrdiff_t prev = s.col4row[r];
      s.col4row[r] = static_cast<std::ptrdiff_t>(j);
      if (r == cur) break;
      j = static_cast<std::size_t>(prev);
    }
  }
  return s;
}

// Among perfect matchings on the tight edges (every one of them is optimal
// under the duals), pick the lexicographically smallest col4row for rows
// [0, rows_to_fix).
void canonicalize(const std::vector<char>& tight, std::size_t n, std::size_t rows_to_fix, SquareSolution& s) {
  std::vector<char> fixed_col(n, 0);
  std::vector<std::ptrdiff_t> prev_col(n);
  std::vector<char> seen(n);
  std::vector<std::size_t> queue;
  for (std::size_t i = 0; i < rows_to_fix; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (!tight[i * n + j] || fixed_col[j]) continue;
      if (s.col4row[i] == static_cast<std::ptrdiff_t>(j)) break;
      // Row r currently owns j; look for an alternating path from r to the
      // column i gives up, through unfixed rows only.
      const std::size_t target = static_cast<std::size_t>(s.col4row[i]);
      const std::size_t r0 = static_cast<std::size_t>(s.row4col[j]);
      std::fill(seen.begin(), seen.end(), 0);
      queue.assign(1, r0);
      std::ptrdiff_t found = -1;
      for (std::size_t q = 0; q < queue.size() && found < 0; ++q) {
        const std::size_t r = queue[q];
        for (std::size_t c = 0; c < n; ++c) {
          if (!tight[r * n + c] || fixed_col[c] || c == j || seen[c]) continue;
          if (s.col4row[r] == static_cast<std::ptrdiff_t>(c)) continue;
          seen[c] = 1;
          prev_col[c] = static_cast<std::ptrdiff_t>(r);
          if (c == target) {
            found = static_cast<std::ptrdiff_t>(c);
            break;
          }
          queue.push_back(static_cast<std::size_t>(s.row4col[c]));
        }
      }
      if (found < 0) continue;
      // Shift along the path: each row on it takes the column it reached.
      std::size_t c = static_cast<std::size_t>(found);
      while (true) {
        const std::size_t r = static_cast<std::size_t>(prev_col[c]);
        const std::size_t old = static_cast<std::size_t>(s.col4row[r]);
        s.col4row[r] = static_cast<std::ptrdiff_t>(c);
        s.row4col[c] = static_cast<std::ptrdiff_t>(r);
        if (r == r0) break;
        c = old;
      }
      s.col4row[i] = static_cast<std::ptrdiff_t>(j);
      s.row4col[j] = static_cast<std::ptrdiff_t>(i);
      break;
    }
    fixed_col[static_cast<std::size_t>(s.col4row[i])] = 1;
  }
}

}  // namespace

Assignment assign(const Matrix& costs, double gate) {
  if (std::isnan(gate)) throw InputError("gate is NaN");
  const std::size_t n = costs.rows, m = costs.cols;
  double cmin = kInf, cmax = -kInf;
  for (double c : costs.values) {
    if (!std::isfinite(c)) throw InputError("cost matrix contains NaN or infinite entries");
    cmin = std::min(cmin, c);
    cmax = std::max(cmax, c);
  }
  Assignment out;
  if (n == 0 || m == 0) {
    for (std::size_t i = 0; i < n; ++i) out.unmatched_rows.push_back(i);
    for (std::size_t j = 0; j < m; ++j) out.unmatched_cols.push_back(j);
    return out;
  }
  // Pad to a square: real row i may pair with dummy column m + i, dummy row
  // n + j with real column j, and dummy rows with any dummy column. The dummy
  // penalty exceeds any change in real cost, so cardinality is maximized first.
  const double span = std::abs(cmax) + std::abs(cmin);
  const double penalty = static_cast<double>(std::min(n, m) + 1) * span + 1.0;
  const std::size_t size = n + m;
  std::vector<double> sq(size * size, kInf);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j)
      if (costs(i, j) <= gate) sq[i * size + j] = costs(i, j);
    sq[i * size + m + i] = penalty;
  }
  for (std::size_t j = 0; j < m; ++j) {
    sq[(n + j) * size + j] = penalty;
    for (std::size_t k = 0; k < n; ++k) sq[(n + j) * size + m + k] = 0.0;
  }
  SquareSolution s = solve_square(sq, size);

  const double eps = 1e-9 * penalty;
  std::vector<char> tight(size * size, 0);
  for (std::size_t i = 0; i < size; ++i)
    for (std::size_t j = 0; j < size; ++j) {
      const double c = sq[i * size + j];
      if (c != kInf && std::abs(c - s.u[i] - s.v[j]) <= eps) tight[i * size + j] = 1;
    }
  for (std::size_t i = 0; i < size; ++i) tight[i * size + static_cast<std::size_t>(s.col4row[i])] = 1;
  canonicalize(tight, size, n, s);

  std::vector<char> col_used(m, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto j = static_cast<std::size_t>(s.col4row[i]);
    if (j < m) {
      out.matches.emplace_back(i, j);
      out.total_cost += costs(i, j);
      col_used[j] = 1;
    } else {
      out.unmatched_rows.push_back(i);
    }
  }
  for (std::size_t j = 0; j < m; ++j)
    if (!col_used[j]) out.unmatched_cols.push_back(j);
  return out;
}

Matrix cost_matrix(const std::vector<Detection>& prev, const std::vector<Detection>& next, const TrackerConfig& config) {
  auto f = [&](std::size_t i, std::size_t j) {
    return pairwise_cost(prev[i], next[j], config.weights, config.image_diag);
  };
  if (config.execution == kernels::Execution::serial) return kernels::fill_matrix_serial(prev.size(), next.size(), f);
  // Validate up front: exceptions must not escape the parallel region.
  if (!(config.image_diag > 0) || !std::isfinite(config.image_diag)) throw InputError("image diagonal must be positive");
  for (const auto* list : {&prev, &next})
    for (const Detection& d : *list)
      if (!(d.box.area() > 0)) throw InputError("zero-area box in cost computation");
  std::size_t dim = 0;
  for (const auto* list : {&prev, &next})
    for (const Detection& d : *list)
      if (d.feature && !d.feature->empty()) {
        if (dim && dim != d.feature->size()) throw InputError("feature vectors differ in dimension");
        dim = d.feature->size();
      }
  return kernels::fill_matrix_omp(prev.size(), next.size(), f);
}

std::vector<Track> track_session(const std::vector<std::vector<Detection>>& frames, const TrackerConfig& config) {
  if (!(config.image_diag > 0)) throw ConfigurationError("tracker image_diag must be positive");
  std::vector<Track> tracks;
  std::vector<std::size_t> active;  // indices into tracks
  std::vector<const Detection*> active_last;
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const auto& dets = frames[f];
    std::vector<std::size_t> next_active;
    std::vector<const Detection*> next_last;
    std::vector<std::optional<std::size_t>> extends(dets.size());
    std::vector<std::optional<double>> link(dets.size());
    if (!active.empty() && !dets.empty()) {
      std::vector<Detection> last;
      last.reserve(active_last.size());
      for (const Detection* d : active_last) last.push_back(*d);
      const Matrix costs = cost_matrix(last, dets, config);
      const Assignment a = assign(costs, config.gate);
      for (const auto& [r, c] : a.matches) {
        extends[c] = active[r];
        link[c] = costs(r, c);
      }
    }
    for (std::size_t j = 0; j < dets.size(); ++j) {
      std::size_t t;
      if (extends[j]) {
        t = *extends[j];
        tracks[t].items.push_back({f, dets[j].index, link[j]});
      } else {
        t = tracks.size();
        tracks.push_back({t, {{f, dets[j].index, std::nullopt}}, std::nullopt});
      }
      next_active.push_back(t);
      next_last.push_back(&dets[j]);
    }
    active = std::move(next_active);
    active_last = std::move(next_last);
  }
  // Consensus needs each track's detections.
  for (Track& t : tracks) {
    std::vector<const Detection*> dets;
    for (const TrackItem& item : t.items) {
      const auto& frame = frames[item.frame_index];
      const auto it = std::find_if(frame.begin(), frame.end(),
                                   [&](const Detection& d) { return d.index == item.detection_index; });
      dets.push_back(&*it);
    }
    t.consensus = consensus(dets);
  }
  return tracks;
}

std::optional<Consensus> consensus(const std::vector<const Detection*>& detections) {
  std::map<TaxonKey, double> sums;
  bool any = false;
  for (const Detection* d : detections) {
    if (!d->species || d->species->empty()) continue;
    any = true;
    for (const auto& s : *d->species) sums[s.taxon_key] += s.probability;
  }
  if (!any) return std::nullopt;
  Consensus best{0, -1.0};
  const double n = static_cast<double>(detections.size());
  for (const auto& [key, sum] : sums) {
    const double mean = sum / n;
    if (mean > best.mean_probability) best = {key, mean};
  }
  return best;
}

Counts count_individuals(const std::vector<Track>& tracks, const taxonomy::Backbone& backbone) {
  Counts out;
  std::int64_t unclassified = 0;
  for (const Track& t : tracks) {
    if (t.consensus) ++out.species[t.consensus->taxon_key];
    else ++unclassified;
  }
  out.genus = taxonomy::rollup_counts(out.species, backbone, taxonomy::RollupLevel::genus);
  out.family = taxonomy::rollup_counts(out.species, backbone, taxonomy::RollupLevel::family);
  if (unclassified) {
    out.species[kUnclassified] = unclassified;
    out.genus[kUnclassified] = unclassified;
    out.family[kUnclassified] = unclassified;
  }
  return out;
}

json to_json(const Track& track, const std::string& session_id) {
  json items = json::array();
  for (const TrackItem& i : track.items) {
    json item = {{"frame_index", i.frame_index}, {"detection_index", i.detection_index}};
    item["link_cost"] = i.link_cost ? json(*i.link_cost) : json(nullptr);
    items.push_back(std::move(item));
  }
  json j = {{"session_id", session_id}, {"track_id", track.track_id}, {"items", std::move(items)}};
  j["consensus"] = track.consensus ? json{{"taxon_key", track.consensus->taxon_key},
                                          {"mean_probability", track.consensus->mean_probability}}
                                   : json(nullptr);
  return j;
}

Track track_from_json(const json& j) {
  Track t;
  t.track_id = j.at("track_id").get<std::size_t>();
  for (const auto& item : j.at("items")) {
    TrackItem ti{item.at("frame_index").get<std::size_t>(), item.at("detection_index").get<std::size_t>(),
                 std::nullopt};
    if (!item.at("link_cost").is_null()) ti.link_cost = item["link_cost"].get<double>();
    t.items.push_back(ti);
  }
  if (!j.at("consensus").is_null())
    t.consensus = Consensus{j["consensus"].at("taxon_key").get<TaxonKey>(),
                            j["consensus"].at("mean_probability").get<double>()};
  return t;
}

json to_json(const Counts& counts) {
  auto level = [](const std::map<TaxonKey, std::int64_t>& m) {
    json arr = json::array();
    for (const auto& [k, v] : m) arr.push_back({{"taxon_key", k}, {"count", v}});
    return arr;
  };
  return {{"species", level(counts.species)}, {"genus", level(counts.genus)}, {"family", level(counts.family)}};
}

}  // namespace ami::tracking
