#include <random>

#include "ami/core/error.hpp"
#include "ami/tracking/tracking.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace ami;
using namespace ami::tracking;

namespace {

Detection det(std::size_t index, double x0, double y0, double x1, double y1,
              std::optional<std::vector<double>> feature = std::nullopt) {
  Detection d;
  d.index = index;
  d.box = {x0, y0, x1, y1};
  d.det_score = 1.0;
  d.feature = std::move(feature);
  return d;
}

Matrix matrix(std::vector<std::vector<double>> rows) {
  Matrix m(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) m(i, j) = rows[i][j];
  return m;
}

void check_against_brute_force(const Matrix& c, double gate) {
  const Assignment a = assign(c, gate);
  const auto bf = oracle::brute_force_assign(c, gate);
  std::vector<std::ptrdiff_t> col_of_row(c.rows, -1);
  for (auto [r, col] : a.matches) col_of_row[r] = static_cast<std::ptrdiff_t>(col);
  REQUIRE(col_of_row == bf.col_of_row);
  CHECK(a.total_cost == bf.total);
  CHECK(a.matches.size() + a.unmatched_rows.size() == c.rows);
  CHECK(a.matches.size() + a.unmatched_cols.size() == c.cols);
}

}  // namespace

TEST_CASE("iou") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {20, 20, 30, 30}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {10, 0, 20, 10}) == 0.0);
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(25.0 / 175.0).epsilon(1e-12));
  CHECK(iou({0, 0, 10, 10}, {5, 5, 15, 15}) == doctest::Approx(oracle::pixel_iou(0, 0, 10, 10, 5, 5, 15, 15)));
}

TEST_CASE("iou matches pixel counting on random integer boxes") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> coord(0, 30), len(1, 15);
  for (int t = 0; t < 300; ++t) {
    const int ax = coord(rng), ay = coord(rng), aw = len(rng), ah = len(rng);
    const int bx = coord(rng), by = coord(rng), bw = len(rng), bh = len(rng);
    const double v = iou({double(ax), double(ay), double(ax + aw), double(ay + ah)},
                         {double(bx), double(by), double(bx + bw), double(by + bh)});
    CHECK(std::abs(v - oracle::pixel_iou(ax, ay, ax + aw, ay + ah, bx, by, bx + bw, by + bh)) <= 1e-9);
    CHECK(v == iou({double(bx), double(by), double(bx + bw), double(by + bh)},
                   {double(ax), double(ay), double(ax + aw), double(ay + ah)}));
  }
}

TEST_CASE("cost weights normalize") {
  const CostWeights w(1, 1, 2, 0);
  CHECK(w.iou() == 0.25);
  CHECK(w.dist() == 0.5);
  CHECK(w.feat() == 0.0);
  CHECK_THROWS_AS(CostWeights(-1, 1, 1, 1), ConfigurationError);
  CHECK_THROWS_AS(CostWeights(0, 0, 0, 0), ConfigurationError);
}

TEST_CASE("pairwise cost examples") {
  const CostWeights w;
  const auto a = det(0, 0, 0, 10, 10, std::vector<double>{1, 0});
  CHECK(pairwise_cost(a, a, w, 100) == 0.0);

  // Opposite corners of a 100x100 image; centre distance equals the diagonal
  // of the centres' span, passed as image_diag.
  const auto tl = det(0, 0, 0, 10, 10, std::vector<double>{0, 1});
  const auto br = det(1, 90, 90, 100, 100, std::vector<double>{0, 1});
  const double diag = std::hypot(90.0, 90.0);
  CHECK(pairwise_cost(tl, br, w, diag) == doctest::Approx(0.5).epsilon(1e-12));

  const CostWeights feat_only(0, 0, 0, 1);
  const auto f1 = det(0, 0, 0, 10, 10, std::vector<double>{1, 0});
  const auto f2 = det(1, 0, 0, 10, 10, std::vector<double>{0, 1});
  CHECK(std::abs(pairwise_cost(f1, f2, feat_only, 100) - 0.5) <= 1e-12);

  const auto nofeat = det(2, 0, 0, 10, 10);
  CHECK(pairwise_cost(f1, nofeat, feat_only, 100) == 0.5);
  CHECK_THROWS_AS(pairwise_cost(det(0, 0, 0, 0, 10), f1, w, 100), InputError);
}

TEST_CASE("assign examples") {
  auto a = assign(matrix({{0.0}}), 1.0);
  REQUIRE(a.matches.size() == 1);
  CHECK(a.matches[0] == std::pair<std::size_t, std::size_t>{0, 0});

  a = assign(matrix({{0.1, 0.2}, {0.2, 0.1}}), 1.0);
  REQUIRE(a.matches.size() == 2);
  CHECK(a.matches[0] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(a.matches[1] == std::pair<std::size_t, std::size_t>{1, 1});
  CHECK(a.total_cost == doctest::Approx(0.2));

  a = assign(matrix({{0.2, 0.9}}), 0.5);
  REQUIRE(a.matches.size() == 1);
  CHECK(a.matches[0] == std::pair<std::size_t, std::size_t>{0, 0});
  CHECK(a.unmatched_cols == std::vector<std::size_t>{1});

  a = assign(Matrix(0, 3), 1.0);
  CHECK(a.unmatched_cols.size() == 3);

  Matrix bad(1, 1);
  bad(0, 0) = std::nan("");
  CHECK_THROWS_AS(assign(bad, 1.0), InputError);
}

TEST_CASE("assign equals brute force on random matrices") {
  std::mt19937_64 rng(12345);
  std::uniform_int_distribution<int> dim(0, 6);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> grid(0, 10);
  for (int t = 0; t < 600; ++t) {
    const std::size_t n = dim(rng), m = dim(rng);
    Matrix c(n, m);
    const bool coarse = t % 2 == 0;  // coarse grids force many ties
    for (double& v : c.values) v = coarse ? grid(rng) / 10.0 : unit(rng);
    const double gate = t % 3 == 0 ? 1.0 : unit(rng);
    check_against_brute_force(c, gate);
  }
}

TEST_CASE("lowering the gate never adds matches") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    Matrix c(5, 4);
    for (double& v : c.values) v = unit(rng);
    std::size_t prev = assign(c, 1.0).matches.size();
    for (double g = 0.9; g >= 0; g -= 0.1) {
      const std::size_t k = assign(c, g).matches.size();
      CHECK(k <= prev);
      prev = k;
    }
  }
}

TEST_CASE("track_session chains a moving moth") {
  TrackerConfig cfg;
  cfg.image_diag = 500;
  std::vector<std::vector<Detection>> frames = {{det(0, 10, 10, 30, 30, std::vector<double>{1, 0})},
                                                {det(0, 12, 11, 32, 31, std::vector<double>{1, 0.05})}};
  const auto tracks = track_session(frames, cfg);
  REQUIRE(tracks.size() == 1);
  CHECK(tracks[0].items.size() == 2);
  CHECK(!tracks[0].items[0].link_cost);
  CHECK(tracks[0].items[1].link_cost);
}

TEST_CASE("feature-dominant weights follow appearance across a swap") {
  TrackerConfig cfg;
  cfg.image_diag = 200;
  cfg.weights = CostWeights(0.05, 0, 0.05, 0.9);
  cfg.gate = 1.0;
  const std::vector<double> fa{1, 0}, fb{0, 1};
  std::vector<std::vector<Detection>> frames = {
      {det(0, 0, 0, 20, 20, fa), det(1, 100, 0, 120, 20, fb)},
      {det(0, 0, 0, 20, 20, fb), det(1, 100, 0, 120, 20, fa)}};
  const auto tracks = track_session(frames, cfg);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].items[1].detection_index == 1);
  CHECK(tracks[1].items[1].detection_index == 0);
  // The same frame pair scored by brute force picks the crossing pairs too.
  const Matrix c = cost_matrix(frames[0], frames[1], cfg);
  const auto bf = oracle::brute_force_assign(c, cfg.gate);
  CHECK(bf.col_of_row == std::vector<std::ptrdiff_t>{1, 0});
}

TEST_CASE("an empty frame terminates every track") {
  TrackerConfig cfg;
  cfg.image_diag = 100;
  std::vector<std::vector<Detection>> frames = {{det(0, 0, 0, 10, 10)}, {}, {det(0, 0, 0, 10, 10)}};
  const auto tracks = track_session(frames, cfg);
  REQUIRE(tracks.size() == 2);
  CHECK(tracks[0].track_id == 0);
  CHECK(tracks[1].items[0].frame_index == 2);
}

TEST_CASE("serial and parallel cost matrices agree") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> pos(0, 400);
  std::normal_distribution<double> g;
  std::vector<Detection> a, b;
  for (std::size_t i = 0; i < 40; ++i) {
    const double x = pos(rng), y = pos(rng);
    a.push_back(det(i, x, y, x + 20, y + 25, std::vector<double>{g(rng), g(rng), g(rng)}));
    const double u = pos(rng), v = pos(rng);
    b.push_back(det(i, u, v, u + 15, v + 30, std::vector<double>{g(rng), g(rng), g(rng)}));
  }
  TrackerConfig cfg;
  cfg.image_diag = 600;
  const Matrix s = cost_matrix(a, b, cfg);
  cfg.execution = kernels::Execution::parallel;
  CHECK(s == cost_matrix(a, b, cfg));
}

TEST_CASE("consensus uses mean probability") {
  auto with_species = [](std::vector<inference::SpeciesScore> s) {
    Detection d = det(0, 0, 0, 1, 1);
    d.species = std::move(s);
    return d;
  };
  // Top-1 flaps A, B, A but B is never far behind: means A=0.5, B=0.4333.
  const Detection d1 = with_species({{1, 0.6}, {2, 0.3}});
  const Detection d2 = with_species({{2, 0.5}, {1, 0.4}});
  const Detection d3 = with_species({{1, 0.5}, {2, 0.5}});
  const auto c = consensus({&d1, &d2, &d3});
  REQUIRE(c);
  CHECK(c->taxon_key == 1);
  CHECK(c->mean_probability == doctest::Approx(0.5));
  const Detection tie = with_species({{5, 0.5}, {3, 0.5}});
  CHECK(consensus({&tie})->taxon_key == 3);
  const Detection none = det(0, 0, 0, 1, 1);
  CHECK(!consensus({&none}));
}
