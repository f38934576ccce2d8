// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failing criteria.

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <set>
#include <sstream>

#include "ami/core/error.hpp"
#include "ami/core/fs.hpp"
#include "ami/core/hash.hpp"
#include "ami/core/image_io.hpp"
#include "ami/dwca/media.hpp"
#include "ami/inference/backends.hpp"
#include "ami/pipeline/engine.hpp"
#include "ami/synthgen/scene.hpp"
#include "ami/tracking/tracking.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"
#include "pipeline_fixtures.hpp"
#include "synth_fixtures.hpp"

using namespace ami;
namespace stdfs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

void expect(Outcome& o, bool ok, const std::string& what) {
  if (!ok && o.pass) {
    o.pass = false;
    o.detail = what;
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

stdfs::path scratch(const std::string& name) {
  const auto d = stdfs::temp_directory_path() / ("ami_acceptance_" + name);
  stdfs::remove_all(d);
  stdfs::create_directories(d);
  return d;
}

tracking::Detection detection(std::size_t index, double x0, double y0, double x1, double y1,
                              std::optional<std::vector<double>> feature = std::nullopt) {
  tracking::Detection d;
  d.index = index;
  d.box = {x0, y0, x1, y1};
  d.det_score = 1.0;
  d.feature = std::move(feature);
  return d;
}

tracking::Detection random_detection(std::mt19937_64& rng, std::size_t index, double w, double h) {
  std::uniform_real_distribution<double> ux(0, w - 2), uy(0, h - 2), side(1, 120), feat(-1, 1);
  const double x = ux(rng), y = uy(rng);
  std::optional<std::vector<double>> f;
  if (rng() % 4 != 0) {
    f = std::vector<double>(8);
    for (auto& v : *f) v = feat(rng);
    if (rng() % 10 == 0) (*f)[0] += 5;  // never all-zero
  }
  return detection(index, x, y, std::min(w, x + side(rng)), std::min(h, y + side(rng)), f);
}

// 1 ---------------------------------------------------------------------------

Outcome assignment_oracle() {
  Outcome o;
  std::mt19937_64 rng(20240612);
  std::uniform_real_distribution<double> u01(0, 1);
  const auto t0 = Clock::now();
  std::size_t n = 0;
  for (; n < 1200; ++n) {
    const std::size_t rows = 1 + rng() % 7, cols = 1 + rng() % 7;
    kernels::Matrix c(rows, cols);
    const bool coarse = n % 3 == 0;  // few distinct values, so ties are common
    for (std::size_t i = 0; i < rows; ++i)
      for (std::size_t j = 0; j < cols; ++j) c(i, j) = coarse ? static_cast<double>(rng() % 5) / 4.0 : u01(rng);
    const double gate = n % 10 == 0 ? 1.0 : u01(rng);
    const auto a = tracking::assign(c, gate);
    const auto bf = oracle::brute_force_assign(c, gate);
    std::vector<std::ptrdiff_t> col_of_row(rows, -1);
    for (auto [r, col] : a.matches) col_of_row[r] = static_cast<std::ptrdiff_t>(col);
    expect(o, col_of_row == bf.col_of_row, "match set differs on matrix " + std::to_string(n));
    expect(o, a.total_cost == bf.total, "total cost differs on matrix " + std::to_string(n));
    expect(o, a.matches.size() + a.unmatched_rows.size() == rows && a.matches.size() + a.unmatched_cols.size() == cols,
           "unmatched lists incomplete on matrix " + std::to_string(n));
  }
  const double secs = seconds_since(t0);
  expect(o, secs < 60.0, "took " + std::to_string(secs) + " s");
  if (o.pass) o.detail = std::to_string(n) + " matrices, max dim 7, " + num(secs) + " s";
  return o;
}

// 2 ---------------------------------------------------------------------------

Outcome iou_oracle() {
  Outcome o;
  std::mt19937_64 rng(7);
  double worst = 0;
  const int pairs = 1000;
  for (int k = 0; k < pairs; ++k) {
    const int ax = rng() % 40, ay = rng() % 40, aw = 1 + rng() % 30, ah = 1 + rng() % 30;
    const int bx = rng() % 40, by = rng() % 40, bw = 1 + rng() % 30, bh = 1 + rng() % 30;
    const double v = tracking::iou({double(ax), double(ay), double(ax + aw), double(ay + ah)},
                                   {double(bx), double(by), double(bx + bw), double(by + bh)});
    worst = std::max(worst, std::abs(v - oracle::pixel_iou(ax, ay, ax + aw, ay + ah, bx, by, bx + bw, by + bh)));
  }
  expect(o, worst <= 1e-9, "max deviation " + num(worst));
  const double ex = tracking::iou({0, 0, 10, 10}, {5, 5, 15, 15});
  expect(o, std::abs(ex - 25.0 / 175.0) <= 1e-12, "(0,0,10,10)/(5,5,15,15) gave " + std::to_string(ex));
  if (o.pass) o.detail = std::to_string(pairs) + " pairs, max deviation " + num(worst);
  return o;
}

// 3 ---------------------------------------------------------------------------

Outcome cost_bounds() {
  Outcome o;
  std::mt19937_64 rng(11);
  const tracking::CostWeights weight_sets[] = {{}, {1, 0, 0, 0}, {0, 0, 0, 1}, {0.1, 0.2, 0.3, 0.4}, {3, 1, 0, 2}};
  const int pairs = 20000;
  for (int k = 0; k < pairs; ++k) {
    const auto a = random_detection(rng, 0, 640, 480);
    const auto b = random_detection(rng, 1, 640, 480);
    const auto& w = weight_sets[k % 5];
    const double diag = k % 7 == 0 ? 50.0 : 800.0;
    const double ab = tracking::pairwise_cost(a, b, w, diag), ba = tracking::pairwise_cost(b, a, w, diag);
    expect(o, ab >= 0.0 && ab <= 1.0, "cost out of [0,1]: " + std::to_string(ab));
    expect(o, ab == ba, "asymmetric pair " + std::to_string(k));
  }
  // Opposite corners, centre distance equal to the diagonal, equal features.
  const auto tl = detection(0, 0, 0, 10, 10, std::vector<double>{0, 1});
  const auto br = detection(1, 90, 90, 100, 100, std::vector<double>{0, 1});
  const double corners = tracking::pairwise_cost(tl, br, tracking::CostWeights(), std::hypot(90.0, 90.0));
  expect(o, std::abs(corners - 0.5) <= 1e-12, "corner example gave " + std::to_string(corners));
  const auto f1 = detection(0, 0, 0, 10, 10, std::vector<double>{1, 0});
  const auto f2 = detection(1, 0, 0, 10, 10, std::vector<double>{0, 1});
  const double ortho = tracking::pairwise_cost(f1, f2, tracking::CostWeights(0, 0, 0, 1), 100);
  expect(o, std::abs(ortho - 0.5) <= 1e-12, "orthogonal feature example gave " + std::to_string(ortho));
  if (o.pass) o.detail = std::to_string(pairs) + " pairs in [0,1] and symmetric; both examples within 1e-12";
  return o;
}

// 4 ---------------------------------------------------------------------------

Outcome tracking_partition() {
  Outcome o;
  std::mt19937_64 rng(4);
  const int sessions = 500;
  std::size_t empties = 0;
  for (int s = 0; s < sessions; ++s) {
    const std::size_t n_frames = 1 + rng() % 10;
    std::vector<std::vector<tracking::Detection>> frames(n_frames);
    std::size_t total = 0;
    for (std::size_t f = 0; f < n_frames; ++f) {
      const std::size_t n = rng() % 9;  // 0..8; an empty frame is common
      for (std::size_t i = 0; i < n; ++i) frames[f].push_back(random_detection(rng, i, 320, 240));
      total += n;
      empties += n == 0;
    }
    tracking::TrackerConfig cfg;
    cfg.image_diag = std::hypot(320.0, 240.0);
    cfg.gate = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    const auto tracks = tracking::track_session(frames, cfg);
    std::map<std::pair<std::size_t, std::size_t>, int> seen;
    for (std::size_t t = 0; t < tracks.size(); ++t) {
      const auto& items = tracks[t].items;
      expect(o, tracks[t].track_id == t, "track ids not in birth order");
      expect(o, !items.empty() && !items[0].link_cost, "track without a birth item");
      for (std::size_t k = 0; k < items.size(); ++k) {
        ++seen[{items[k].frame_index, items[k].detection_index}];
        if (k == 0) continue;
        // Consecutive frames only: an empty frame (or any gap) ends a track.
        expect(o, items[k].frame_index == items[k - 1].frame_index + 1, "track bridges a gap");
        expect(o, items[k].link_cost && *items[k].link_cost <= cfg.gate, "link above the gate");
      }
    }
    std::size_t covered = 0;
    for (std::size_t f = 0; f < n_frames; ++f)
      for (const auto& d : frames[f]) {
        const auto it = seen.find({f, d.index});
        expect(o, it != seen.end() && it->second == 1, "detection not in exactly one track");
        covered += it != seen.end();
      }
    expect(o, covered == total && seen.size() == total, "tracks reference unknown detections");
  }
  // The specified termination case: a detection, an empty frame, the same detection.
  tracking::TrackerConfig cfg;
  cfg.image_diag = 100;
  const auto t = tracking::track_session({{detection(0, 0, 0, 10, 10)}, {}, {detection(0, 0, 0, 10, 10)}}, cfg);
  expect(o, t.size() == 2 && t[0].items.size() == 1 && t[1].items[0].frame_index == 2 && !t[1].items[0].link_cost,
         "empty frame did not terminate the track");
  if (o.pass)
    o.detail = std::to_string(sessions) + " sessions (" + std::to_string(empties) +
               " empty frames), every detection in exactly one track";
  return o;
}

// 5 ---------------------------------------------------------------------------

Outcome rollup_conservation() {
  Outcome o;
  using namespace taxonomy;
  // 10 families, 50 genera, 500 species, plus 25 synonyms of random species.
  std::vector<TaxonRecord> recs;
  std::map<TaxonKey, TaxonKey> genus_of, family_of_genus;
  for (int f = 0; f < 10; ++f) recs.push_back({1000 + f, "Family" + std::to_string(f) + "idae", Rank::family});
  for (int g = 0; g < 50; ++g) {
    family_of_genus[2000 + g] = 1000 + g % 10;
    recs.push_back({2000 + g, "Genus" + std::to_string(g), Rank::genus, Status::accepted, {}, 1000 + g % 10});
  }
  std::mt19937_64 rng(5);
  for (int s = 0; s < 500; ++s) {
    const TaxonKey g = 2000 + static_cast<TaxonKey>(rng() % 50);
    genus_of[10000 + s] = g;
    recs.push_back({10000 + s, "Genus" + std::to_string(g - 2000) + " species" + std::to_string(s), Rank::species,
                    Status::accepted, {}, g});
  }
  for (int k = 0; k < 25; ++k) {
    const TaxonKey target = 10000 + static_cast<TaxonKey>(rng() % 500);
    genus_of[20000 + k] = genus_of[target];
    recs.push_back({20000 + k, "Synonym species" + std::to_string(k), Rank::species, Status::synonym, target,
                    genus_of[target]});
  }
  const Backbone bb(recs);

  double worst = 0;
  const int trials = 300;
  for (int t = 0; t < trials; ++t) {
    std::map<TaxonKey, double> probs;
    const std::size_t n = 1 + rng() % 500;
    std::gamma_distribution<double> gamma(0.3, 1.0);
    double sum = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const TaxonKey key = rng() % 20 == 0 ? 20000 + static_cast<TaxonKey>(rng() % 25)
                                           : 10000 + static_cast<TaxonKey>(rng() % 500);
      const double v = gamma(rng);
      probs[key] += v;
    }
    for (auto& [k, v] : probs) sum += v;
    for (auto& [k, v] : probs) v /= sum;
    double mass = 0;
    for (auto& [k, v] : probs) mass += v;
    // Independent rollup from the explicit parent maps.
    std::map<TaxonKey, double> expect_genus, expect_family;
    for (const auto& [k, v] : probs) {
      expect_genus[genus_of.at(k)] += v;
      expect_family[family_of_genus.at(genus_of.at(k))] += v;
    }
    const auto genus = rollup(probs, bb, RollupLevel::genus);
    const auto family = rollup(probs, bb, RollupLevel::family);
    double gsum = 0, fsum = 0;
    for (const auto& [k, v] : genus) gsum += v;
    for (const auto& [k, v] : family) fsum += v;
    worst = std::max({worst, std::abs(gsum - mass), std::abs(fsum - mass)});
    expect(o, genus.size() == expect_genus.size() && family.size() == expect_family.size(), "rolled-up key sets differ");
    for (const auto& [k, v] : expect_genus) expect(o, genus.count(k) && std::abs(genus.at(k) - v) <= 1e-12, "genus mass");
    for (const auto& [k, v] : expect_family)
      expect(o, family.count(k) && std::abs(family.at(k) - v) <= 1e-12, "family mass");
  }
  expect(o, worst <= 1e-12, "conservation error " + num(worst));

  // Counts at species, genus and family from fixture tracks.
  std::vector<tracking::Track> tracks;
  std::map<TaxonKey, std::int64_t> species_expect, genus_expect, family_expect;
  for (std::size_t i = 0; i < 60; ++i) {
    tracking::Track tr;
    tr.track_id = i;
    tr.items.push_back({i, 0, std::nullopt});
    const TaxonKey key = 10000 + static_cast<TaxonKey>(rng() % 40);
    tr.consensus = tracking::Consensus{key, 0.9};
    ++species_expect[key];
    ++genus_expect[genus_of.at(key)];
    ++family_expect[family_of_genus.at(genus_of.at(key))];
    tracks.push_back(tr);
  }
  const auto counts = tracking::count_individuals(tracks, bb);
  expect(o, counts.species == species_expect, "species counts");
  expect(o, counts.genus == genus_expect, "genus counts");
  expect(o, counts.family == family_expect, "family counts");
  if (o.pass)
    o.detail = std::to_string(trials) + " distributions on 500 species, max error " + num(worst) +
               "; three-level counts match";
  return o;
}

// 6 ---------------------------------------------------------------------------

Outcome scene_fidelity() {
  Outcome o;
  const std::vector<Raster> bgs{fixture::noise_background(320, 240, 1), fixture::noise_background(300, 260, 2)};
  const auto crops = fixture::moth_crops(12, 3, 14, 48);
  const auto dir = scratch("scenes");

  synthgen::DatasetSpec spec;
  spec.n_scenes = 200;
  spec.seed = 2024;
  spec.scene.n_min = 1;
  spec.scene.n_max = 8;
  spec.scene.allow_overlap = false;
  spec.out_dir = dir / "a";
  const auto recs = synthgen::generate_dataset(bgs, crops, spec);
  const auto placed = synthgen::render_scenes(bgs, crops, spec, 0, spec.n_scenes, kernels::Execution::serial);
  std::size_t boxes = 0;
  for (std::size_t i = 0; i < recs.size(); ++i) {
    // The background of scene i is whichever one has its dimensions.
    const Raster img = read_image(dir / "a" / "images" / recs[i].file_name);
    const Raster* bg = nullptr;
    for (const auto& b : bgs)
      if (b.width() == img.width() && b.height() == img.height()) bg = &b;
    expect(o, bg != nullptr, "scene has no matching background");
    if (!bg) continue;
    expect(o, fixture::boxes_match_pasted_pixels(img, *bg, recs[i].annotation.boxes),
           "re-measured extent differs in " + recs[i].file_name);
    boxes += recs[i].annotation.boxes.size();
  }
  expect(o, placed == recs, "serial render differs from the written dataset");

  spec.out_dir = dir / "b";
  synthgen::generate_dataset(bgs, crops, spec);
  bool identical = fs::read_bytes(dir / "a" / "annotations.json") == fs::read_bytes(dir / "b" / "annotations.json");
  for (const auto& r : recs)
    identical = identical && fs::read_bytes(dir / "a" / "images" / r.file_name) ==
                                 fs::read_bytes(dir / "b" / "images" / r.file_name);
  expect(o, identical, "same-seed regeneration is not byte-identical");

  // Full-size run: 5000 scenes on 640x480 backgrounds.
  const std::vector<Raster> big{fixture::noise_background(640, 480, 3), fixture::noise_background(640, 480, 4)};
  synthgen::DatasetSpec full;
  full.seed = 99;
  full.out_dir = dir / "full";
  const auto t0 = Clock::now();
  const auto all = synthgen::generate_dataset(big, crops, full);
  const double secs = seconds_since(t0);
  expect(o, all.size() == 5000, "expected 5000 scenes");
  expect(o, synthgen::parse_coco_json(fs::read_text(dir / "full" / "annotations.json")).size() == 5000,
         "annotation file does not hold 5000 images");
  expect(o, secs < 600.0, "5000 scenes took " + std::to_string(secs) + " s");
  stdfs::remove_all(dir);
  if (o.pass)
    o.detail = "200 scenes / " + std::to_string(boxes) + " boxes exact, byte-identical regeneration, 5000 scenes in " +
               num(secs) + " s";
  return o;
}

// 7 ---------------------------------------------------------------------------

/// Dark, fully opaque cut-outs (alpha 0 or 255) so the blob extent is the box.
std::vector<synthgen::CropAsset> dark_crops(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<synthgen::CropAsset> out;
  for (int k = 0; k < n; ++k) {
    const int w = 24 + rng() % 25, h = 24 + rng() % 25;
    Raster img(w, h, {0, 0, 0, 0});
    const double cx = w / 2.0, cy = h / 2.0, rx = w / 2.0, ry = h / 2.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double e = std::pow((x + 0.5 - cx) / rx, 2) + std::pow((y + 0.5 - cy) / ry, 2);
        if (e <= 1.0) {
          const auto v = static_cast<std::uint8_t>(20 + rng() % 30);
          img.set(x, y, {v, v, static_cast<std::uint8_t>(v + 10), 255});
        }
      }
    out.push_back({std::move(img), "dark" + std::to_string(k), synthgen::ReviewState::approved});
  }
  return out;
}

Raster pale_background(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Raster r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto v = static_cast<std::uint8_t>(205 + rng() % 21);
      r.set(x, y, {v, v, static_cast<std::uint8_t>(v - 10), 255});
    }
  return r;
}

struct BlobScore {
  std::size_t truth = 0, found = 0;
  double worst_center = 0;
};

/// Greedy one-to-one matching of truth boxes to detections by centre distance.
void score_scene(const synthgen::Scene& s, const std::vector<inference::ScoredBox>& dets, BlobScore& acc,
                 double max_center) {
  std::vector<char> used(dets.size(), 0);
  for (const auto& b : s.annotation.boxes) {
    ++acc.truth;
    const double cx = (b.x_min + b.x_max) / 2.0, cy = (b.y_min + b.y_max) / 2.0;
    double best = 1e18;
    std::size_t pick = dets.size();
    for (std::size_t i = 0; i < dets.size(); ++i) {
      if (used[i]) continue;
      const auto& d = dets[i].box;
      const double dist = std::hypot((d.x_min + d.x_max) / 2.0 - cx, (d.y_min + d.y_max) / 2.0 - cy);
      if (dist < best) best = dist, pick = i;
    }
    if (pick < dets.size() && best <= max_center) {
      used[pick] = 1;
      ++acc.found;
      acc.worst_center = std::max(acc.worst_center, best);
    }
  }
}

Outcome blob_baseline() {
  Outcome o;
  const auto crops = dark_crops(10, 17);
  const auto params = inference::parse_blob_params("threshold=40;min_area=100");
  synthgen::SceneConfig sparse;
  sparse.n_min = 3;
  sparse.n_max = 10;
  sparse.allow_overlap = false;
  sparse.min_separation_px = 20;
  BlobScore clean, dense;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto s = synthgen::compose_scene(pale_background(480, 360, i), crops, sparse, 1000 + i);
    score_scene(s, inference::blob_detect(s.image, params), clean, 3.0);
  }
  synthgen::SceneConfig crowded;
  crowded.n_min = 25;
  crowded.n_max = 40;
  crowded.allow_overlap = true;
  for (std::uint64_t i = 0; i < 100; ++i) {
    const auto s = synthgen::compose_scene(pale_background(240, 180, 500 + i), crops, crowded, 5000 + i);
    score_scene(s, inference::blob_detect(s.image, params), dense, 3.0);
  }
  const double recall = double(clean.found) / double(clean.truth);
  const double dense_recall = double(dense.found) / double(dense.truth);
  expect(o, recall >= 0.95, "recall " + std::to_string(recall));
  expect(o, clean.worst_center <= 3.0, "centre error " + std::to_string(clean.worst_center));
  expect(o, dense_recall < recall - 0.1, "dense recall " + std::to_string(dense_recall) + " did not degrade");
  char buf[160];
  std::snprintf(buf, sizeof buf, "recall %.3f over %zu insects, worst centre error %.2f px; dense recall %.3f",
                recall, clean.truth, clean.worst_center, dense_recall);
  if (o.pass) o.detail = buf;
  return o;
}

// 8 ---------------------------------------------------------------------------

Outcome cleaning_rules() {
  Outcome o;
  using namespace dwca;
  fixture::StubServer server;
  const auto c = fixture::cleaning_archive(server);
  auto a = parse_archive_bytes(c.archive);
  FetchOptions opt;
  opt.cache_dir = scratch("clean");
  opt.retries = 0;
  fetch_media(a.media, opt);
  CleaningRules rules;
  rules.dataset_blacklist = {"ds-descriptions", "ds-habitat"};
  clean_media(a.occurrences, a.media, rules);
  std::set<Verdict> categories;
  for (const auto& m : a.media) {
    expect(o, m.verdict == c.expected.at(m.url), m.url + " got " + std::string(to_string(m.verdict)));
    categories.insert(m.verdict);
  }
  expect(o, a.media.size() == c.expected.size(), "media count");
  for (Verdict v : {Verdict::duplicate, Verdict::thumbnail, Verdict::non_adult, Verdict::blacklisted_dataset})
    expect(o, categories.count(v) == 1, "fixture lacks category " + std::string(to_string(v)));
  stdfs::remove_all(opt.cache_dir);

  std::vector<OccurrenceRecord> occ;
  std::vector<MediaRecord> media;
  for (int i = 0; i < 1500; ++i) {
    const std::string id = "sp7-" + std::to_string(i);
    occ.push_back({id, 7});
    MediaRecord m{id, "u/" + id};
    m.content_hash = sha256_hex(id);
    m.verdict = Verdict::kept;
    media.push_back(m);
  }
  std::vector<taxonomy::ChecklistEntry> checklist(1);
  checklist[0].resolution = taxonomy::Resolution::accepted;
  checklist[0].resolved_key = 7;
  const auto r = export_training_set(occ, media, checklist, "cache", kDefaultCapPerSpecies, 1);
  std::set<std::string> distinct;
  for (const auto& row : r.rows) distinct.insert(row.content_hash);
  expect(o, r.rows.size() == 1000 && distinct.size() == 1000, "cap gave " + std::to_string(r.rows.size()));
  if (o.pass) o.detail = std::to_string(a.media.size()) + " verdicts as expected; 1000 of 1500 exported";
  return o;
}

// 9 ---------------------------------------------------------------------------

std::map<std::string, std::string> outputs(const pipeline::Engine& e, const std::string& sid, const std::string& job) {
  std::map<std::string, std::string> out;
  for (const char* f : {"detections.jsonl", "tracks.jsonl", "counts.json"})
    out[f] = fixture::read_or_empty(e.results_dir(sid, job) / f);
  return out;
}

void kill_and_resume(Outcome& o) {
  const auto root = scratch("resume");
  const auto data = root / "data";
  fixture::write_session(data, "trap1", 10);
  const auto stub = fixture::write_stub_fixture(root / "stub.json");
  const auto spec = fixture::stub_job_spec(stub);

  fixture::init_home(root / "clean", data);
  std::string sid, job_id;
  std::map<std::string, std::string> reference;
  {
    pipeline::Engine e(root / "clean");
    fixture::write_backbone(root / "clean");
    sid = e.discover().sessions.at(0).session_id;
    job_id = e.enqueue(sid, spec).job.job_id;
    e.work({});
    reference = outputs(e, sid, job_id);
  }
  fixture::init_home(root / "crash", data);
  fixture::write_backbone(root / "crash");
  {
    pipeline::Engine e(root / "crash");
    e.discover();
    e.enqueue(sid, spec);
  }
  std::fflush(stdout);
  const pid_t pid = fork();
  if (pid == 0) {
    pipeline::Engine e(root / "crash");
    pipeline::Engine::WorkOptions w;
    w.after_commit = [](const std::string&, std::size_t frame) {
      if (frame == 2) ::_exit(0);  // killed after the third frame commits
    };
    e.work(w);
    ::_exit(1);
  }
  int status = 0;
  waitpid(pid, &status, 0);
  expect(o, WIFEXITED(status) && WEXITSTATUS(status) == 0, "worker was not killed mid-job");

  pipeline::Engine e(root / "crash");
  expect(o, e.job(job_id)->frames_done == 3, "expected 3 committed frames before the kill");
  std::vector<std::size_t> recomputed;
  pipeline::Engine::WorkOptions w;
  w.only_stale_running = true;
  w.after_commit = [&](const std::string&, std::size_t f) { recomputed.push_back(f); };
  e.work(w);
  expect(o, recomputed == std::vector<std::size_t>{3, 4, 5, 6, 7, 8, 9}, "resume recomputed the wrong frames");
  expect(o, e.job(job_id)->state == pipeline::JobState::completed, "resumed job did not complete");
  expect(o, e.store().ledger(job_id).read().records == 10, "ledger does not hold exactly one record per frame");
  expect(o, !reference["detections.jsonl"].empty() && outputs(e, sid, job_id) == reference,
         "outputs differ from the uninterrupted run");
  stdfs::remove_all(root);
}

/// Random interleavings of queue operations against an in-memory table,
/// checked against an independently written transition relation.
void state_machine(Outcome& o, std::size_t steps) {
  using pipeline::JobState;
  using S = JobState;
  const std::set<std::pair<S, S>> allowed{{S::queued, S::running},    {S::queued, S::cancelled},
                                          {S::running, S::completed}, {S::running, S::failed},
                                          {S::running, S::cancelled}, {S::failed, S::queued}};
  std::mt19937_64 rng(99);
  pipeline::JobTable table;
  std::int64_t now = 1000;
  std::set<std::int64_t> dead;  // crashed worker pids
  struct Worker {
    std::string id;
    std::int64_t pid;
    std::optional<std::string> job;
  };
  std::vector<Worker> workers;
  std::int64_t next_pid = 1;
  for (int w = 0; w < 4; ++w) workers.push_back({"w" + std::to_string(w), next_pid++, std::nullopt});
  const auto alive = [&](const pipeline::Lease& l) { return !dead.count(l.pid); };
  std::vector<pipeline::JobSpec> specs(3);
  for (std::size_t i = 0; i < specs.size(); ++i) specs[i].tracker.gate = 0.5 + 0.1 * static_cast<double>(i);

  std::size_t illegal = 0, double_claims = 0, conflicts = 0;
  for (std::size_t step = 0; step < steps; ++step) {
    std::map<std::string, S> before;
    for (const auto& j : table.jobs()) before[j.job_id] = j.state;
    Worker& w = workers[rng() % workers.size()];
    try {
      switch (rng() % 9) {
        case 0:
          table.enqueue("s" + std::to_string(rng() % 4), specs[rng() % specs.size()], 10);
          break;
        case 1:
        case 2:
          if (!w.job) w.job = table.claim({w.id, w.pid, "h", now + 30}, now, alive, rng() % 4 == 0);
          break;
        case 3:
          if (w.job && table.holds(*w.job, w.id, now)) {
            table.transition(*w.job, rng() % 3 ? S::completed : S::failed);
            w.job.reset();
          } else {
            w.job.reset();  // lost the lease
          }
          break;
        case 4:
          if (w.job && table.holds(*w.job, w.id, now)) table.renew(*w.job, w.id, now, now + 30);
          break;
        case 5:  // crash: the worker restarts under a new pid and forgets its job
          dead.insert(w.pid);
          w.pid = next_pid++;
          w.job.reset();
          break;
        case 6:
          if (!table.jobs().empty()) table.transition(table.jobs()[rng() % table.jobs().size()].job_id, S::cancelled);
          break;
        case 7:
          if (!table.jobs().empty()) table.transition(table.jobs()[rng() % table.jobs().size()].job_id, S::queued);
          break;
        case 8:
          now += static_cast<std::int64_t>(rng() % 20);
          break;
      }
    } catch (const ConflictError&) {
      ++conflicts;  // refused transitions must leave the table untouched; checked below
    }
    for (const auto& j : table.jobs()) {
      const auto it = before.find(j.job_id);
      const S from = it == before.end() ? S::queued : it->second;
      if (it == before.end() && j.state != S::queued) ++illegal;
      if (from != j.state && !allowed.count({from, j.state})) ++illegal;
      if ((j.state == S::running) != j.lease.has_value()) ++illegal;
    }
    std::map<std::string, int> holders;
    for (const auto& wk : workers)
      if (wk.job && table.holds(*wk.job, wk.id, now)) ++holders[*wk.job];
    for (const auto& [job, n] : holders) double_claims += n > 1;
    if (step % 5000 == 0) {
      const auto copy = pipeline::JobTable::from_json(table.to_json());
      expect(o, copy.jobs() == table.jobs(), "job table does not survive serialization");
    }
  }
  expect(o, illegal == 0, std::to_string(illegal) + " illegal transitions");
  expect(o, double_claims == 0, std::to_string(double_claims) + " double claims");
  expect(o, conflicts > 0, "the scheduler never attempted an illegal transition");
}

Outcome crash_tolerance() {
  Outcome o;
  kill_and_resume(o);
  const std::size_t steps = 200000;
  state_machine(o, steps);
  if (o.pass)
    o.detail = "kill after frame 3 of 10, resume recomputed 4..10, outputs byte-identical; " + std::to_string(steps) +
               " random queue steps, no illegal transition";
  return o;
}

// 10 --------------------------------------------------------------------------

Outcome dwca_round_trip() {
  Outcome o;
  using namespace dwca;
  const std::pair<const char*, std::vector<std::uint8_t>> fixtures[] = {
      {"tab", fixture::tab_archive()},
      {"comma quoted", fixture::comma_quoted_archive()},
      {"comma headerless", fixture::comma_headerless_archive()}};
  const SerializeOptions dialects[] = {{'\t', std::nullopt, true}, {',', '"', true}, {',', '"', false}};
  for (const auto& [name, bytes] : fixtures) {
    const auto first = parse_archive_bytes(bytes);
    expect(o, !first.occurrences.empty() && !first.media.empty(), std::string(name) + " parsed empty");
    for (const auto& d : dialects) {
      std::vector<std::uint8_t> out;
      try {
        out = serialize_archive(first.occurrences, first.media, d);
      } catch (const InputError&) {
        continue;  // values containing the delimiter cannot be written unquoted
      }
      const auto again = parse_archive_bytes(out);
      expect(o, again.occurrences == first.occurrences && again.media == first.media,
             std::string(name) + " is not a fixed point");
      expect(o, serialize_archive(again.occurrences, again.media, d) == out,
             std::string(name) + " serialization is not stable");
    }
  }
  if (o.pass) o.detail = "3 archives, parse/serialize/parse fixed point in tab and comma dialects";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"assignment oracle", assignment_oracle},  {"iou oracle", iou_oracle},
      {"cost bounds", cost_bounds},              {"tracking partition", tracking_partition},
      {"rollup conservation", rollup_conservation}, {"synthetic scene fidelity", scene_fidelity},
      {"blob detector baseline", blob_baseline}, {"cleaning rules", cleaning_rules},
      {"crash tolerance", crash_tolerance},      {"dwca round trip", dwca_round_trip}};
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int n = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(n)) continue;
    Outcome r;
    try {
      r = criteria[i].second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %2d %s: %s\n", r.pass ? "PASS" : "FAIL", n, criteria[i].first, r.detail.c_str());
    std::fflush(stdout);
    failed += !r.pass;
  }
  return failed;
}
