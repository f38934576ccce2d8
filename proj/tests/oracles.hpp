#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They are deliberately naive: exhaustive enumeration, pixel counting.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "ami/kernels/matrix.hpp"

namespace oracle {

struct BruteAssignment {
  std::vector<std::ptrdiff_t> col_of_row;  // -1 when unmatched
  std::size_t matched = 0;
  double total = 0;
};

/// Exhaustive search over every gated partial assignment. Preference: more
/// matched pairs, then lower total (ties within 1e-9), then the
/// lexicographically smallest row-to-column vector with unmatched ranked last.
inline BruteAssignment brute_force_assign(const ami::kernels::Matrix& c, double gate) {
  const std::size_t n = c.rows, m = c.cols;
  BruteAssignment best;
  best.col_of_row.assign(n, -1);
  bool have = false;
  std::vector<std::ptrdiff_t> cur(n, -1);
  std::vector<char> used(m, 0);
  auto key = [m](std::ptrdiff_t v) { return v < 0 ? static_cast<std::ptrdiff_t>(m) : v; };
  auto better = [&](std::size_t cnt, double total) {
    if (!have) return true;
    if (cnt != best.matched) return cnt > best.matched;
    if (std::abs(total - best.total) > 1e-9) return total < best.total;
    for (std::size_t i = 0; i < n; ++i)
      if (key(cur[i]) != key(best.col_of_row[i])) return key(cur[i]) < key(best.col_of_row[i]);
    return false;
  };
  auto rec = [&](auto&& self, std::size_t row) -> void {
    if (row == n) {
      std::size_t cnt = 0;
      double total = 0;
      for (std::size_t i = 0; i < n; ++i)
        if (cur[i] >= 0) {
          ++cnt;
          total += c(i, static_cast<std::size_t>(cur[i]));
        }
      if (better(cnt, total)) {
        best = {cur, cnt, total};
        have = true;
      }
      return;
    }
    cur[row] = -1;
    self(self, row + 1);
    for (std::size_t j = 0; j < m; ++j) {
      if (used[j] || c(row, j) > gate) continue;
      used[j] = 1;
      cur[row] = static_cast<std::ptrdiff_t>(j);
      self(self, row + 1);
      used[j] = 0;
      cur[row] = -1;
    }
  };
  rec(rec, 0);
  return best;
}

/// IoU of integer-aligned boxes by counting unit pixels.
inline double pixel_iou(int ax0, int ay0, int ax1, int ay1, int bx0, int by0, int bx1, int by1) {
  long inter = 0, uni = 0;
  const int x0 = std::min(ax0, bx0), y0 = std::min(ay0, by0), x1 = std::max(ax1, bx1), y1 = std::max(ay1, by1);
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x) {
      const bool in_a = x >= ax0 && x < ax1 && y >= ay0 && y < ay1;
      const bool in_b = x >= bx0 && x < bx1 && y >= by0 && y < by1;
      inter += in_a && in_b;
      uni += in_a || in_b;
    }
  return uni ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

/// Optimal string alignment distance by the textbook recurrence.
inline std::size_t osa_distance(const std::string& a, const std::string& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i)
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) d[i][j] = std::min(d[i][j], d[i - 2][j - 2] + 1);
    }
  return d[a.size()][b.size()];
}

}  // namespace oracle
