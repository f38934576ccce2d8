#include "ami/kernels/image.hpp"

#include <omp.h>

#include <algorithm>
#include <array>
#include <numeric>

namespace ami::kernels {

GrayImage to_gray_serial(const Raster& image) {
  GrayImage g{image.width(), image.height(), std::vector<std::uint8_t>(image.area())};
  const auto px = image.bytes();
  for (std::size_t i = 0; i < g.pixels.size(); ++i)
    g.pixels[i] = luma(px[i * 4], px[i * 4 + 1], px[i * 4 + 2]);
  return g;
}

GrayImage to_gray_omp(const Raster& image) {
  GrayImage g{image.width(), image.height(), std::vector<std::uint8_t>(image.area())};
  const auto px = image.bytes();
  const auto n = static_cast<long long>(g.pixels.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) g.pixels[i] = luma(px[i * 4], px[i * 4 + 1], px[i * 4 + 2]);
  return g;
}

namespace {

std::uint8_t median_from_histogram(const std::array<std::int64_t, 256>& hist, std::int64_t n) {
  const std::int64_t target = (n + 1) / 2;
  std::int64_t cum = 0;
  for (int v = 0; v < 256; ++v) {
    cum += hist[v];
    if (cum >= target) return static_cast<std::uint8_t>(v);
  }
  return 255;
}

}  // namespace

std::uint8_t median_gray_serial(const GrayImage& gray) {
  std::array<std::int64_t, 256> hist{};
  for (std::uint8_t v : gray.pixels) ++hist[v];
  return median_from_histogram(hist, static_cast<std::int64_t>(gray.pixels.size()));
}

std::uint8_t median_gray_omp(const GrayImage& gray) {
  std::array<std::int64_t, 256> hist{};
  const auto n = static_cast<long long>(gray.pixels.size());
#pragma omp parallel
  {
    std::array<std::int64_t, 256> local{};
#pragma omp for schedule(static) nowait
    for (long long i = 0; i < n; ++i) ++local[gray.pixels[i]];
#pragma omp critical
    for (int v = 0; v < 256; ++v) hist[v] += local[v];
  }
  return median_from_histogram(hist, n);
}

DiffMask threshold_absdiff_serial(const GrayImage& gray, std::uint8_t background, std::uint8_t threshold) {
  DiffMask out{std::vector<std::uint8_t>(gray.pixels.size()), std::vector<std::uint8_t>(gray.pixels.size())};
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const int d = std::abs(int(gray.pixels[i]) - int(background));
    out.diff[i] = static_cast<std::uint8_t>(d);
    out.mask[i] = d >= threshold ? 1 : 0;
  }
  return out;
}

DiffMask threshold_absdiff_omp(const GrayImage& gray, std::uint8_t background, std::uint8_t threshold) {
  DiffMask out{std::vector<std::uint8_t>(gray.pixels.size()), std::vector<std::uint8_t>(gray.pixels.size())};
  const auto n = static_cast<long long>(gray.pixels.size());
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < n; ++i) {
    const int d = std::abs(int(gray.pixels[i]) - int(background));
    out.diff[i] = static_cast<std::uint8_t>(d);
    out.mask[i] = d >= threshold ? 1 : 0;
  }
  return out;
}

Labeling label_components_serial(const std::vector<std::uint8_t>& mask, const std::vector<std::uint8_t>& diff,
                                 int width, int height) {
  Labeling out;
  out.labels.assign(mask.size(), 0);
  std::vector<std::int64_t> stack;
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      const std::int64_t start = static_cast<std::int64_t>(y) * width + x;
      if (!mask[start] || out.labels[start]) continue;
      const auto label = static_cast<std::int32_t>(out.components.size() + 1);
      Component c{x, y, x + 1, y + 1, 0, 0};
      out.labels[start] = label;
      stack.push_back(start);
      while (!stack.empty()) {
        const std::int64_t p = stack.back();
        stack.pop_back();
        const int px = static_cast<int>(p % width), py = static_cast<int>(p / width);
        ++c.area;
        c.diff_sum += diff[p];
        c.x_min = std::min(c.x_min, px);
        c.y_min = std::min(c.y_min, py);
        c.x_max = std::max(c.x_max, px + 1);
        c.y_max = std::max(c.y_max, py + 1);
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = px + dx, ny = py + dy;
            if ((dx == 0 && dy == 0) || nx < 0 || ny < 0 || nx >= width || ny >= height) continue;
            const std::int64_t q = static_cast<std::int64_t>(ny) * width + nx;
            if (mask[q] && !out.labels[q]) {
              out.labels[q] = label;
              stack.push_back(q);
            }
          }
        }
      }
      out.components.push_back(c);
    }
  }
  return out;
}

namespace {

// Union-find over pixel indices where the root is always the smallest index
// in the set, i.e. the component's first pixel in raster order.
std::int64_t find_root(std::vector<std::int64_t>& parent, std::int64_t i) {
  while (parent[i] != i) {
    parent[i] = parent[parent[i]];
    i = parent[i];
  }
  return i;
}

void unite(std::vector<std::int64_t>& parent, std::int64_t a, std::int64_t b) {
  a = find_root(parent, a);
  b = find_root(parent, b);
  if (a == b) return;
  if (a < b) parent[b] = a;
  else parent[a] = b;
}

}  // namespace

Labeling label_components_omp(const std::vector<std::uint8_t>& mask, const std::vector<std::uint8_t>& diff,
                              int width, int height) {
  const std::int64_t n = static_cast<std::int64_t>(width) * height;
  std::vector<std::int64_t> parent(static_cast<std::size_t>(n));
  std::iota(parent.begin(), parent.end(), 0);

  const int strips = std::max(1, std::min(height, omp_get_max_threads() * 4));
  auto strip_begin = [&](int s) { return static_cast<int>(static_cast<std::int64_t>(height) * s / strips); };

  // Each strip only unions pixels inside itself, so strips never share roots.
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < strips; ++s) {
    const int y0 = strip_begin(s), y1 = strip_begin(s + 1);
    for (int y = y0; y < y1; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::int64_t p = static_cast<std::int64_t>(y) * width + x;
        if (!mask[p]) continue;
        if (x > 0 && mask[p - 1]) unite(parent, p, p - 1);
        if (y > y0) {
          const std::int64_t up = p - width;
          if (x > 0 && mask[up - 1]) unite(parent, p, up - 1);
          if (mask[up]) unite(parent, p, up);
          if (x + 1 < width && mask[up + 1]) unite(parent, p, up + 1);
        }
      }
    }
  }
  // stitch strip seams
  for (int s = 1; s < strips; ++s) {
    const int y = strip_begin(s);
    if (y == 0 || y >= height) continue;
    for (int x = 0; x < width; ++x) {
      const std::int64_t p = static_cast<std::int64_t>(y) * width + x;
      if (!mask[p]) continue;
      const std::int64_t up = p - width;
      if (x > 0 && mask[up - 1]) unite(parent, p, up - 1);
      if (mask[up]) unite(parent, p, up);
      if (x + 1 < width && mask[up + 1]) unite(parent, p, up + 1);
    }
  }
  // flatten without mutation so the loop is race free
  std::vector<std::int64_t> root(static_cast<std::size_t>(n), -1);
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < n; ++p) {
    if (!mask[p]) continue;
    std::int64_t r = p;
    while (parent[r] != r) r = parent[r];
    root[p] = r;
  }

  Labeling out;
  out.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<std::int32_t> label_of_root(static_cast<std::size_t>(n), 0);
  for (std::int64_t p = 0; p < n; ++p) {
    if (mask[p] && root[p] == p) {
      label_of_root[p] = static_cast<std::int32_t>(out.components.size() + 1);
      const int x = static_cast<int>(p % width), y = static_cast<int>(p / width);
      out.components.push_back(Component{x, y, x + 1, y + 1, 0, 0});
    }
  }
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < n; ++p)
    if (mask[p]) out.labels[p] = label_of_root[root[p]];

  const int threads = omp_get_max_threads();
  std::vector<std::vector<Component>> partial(static_cast<std::size_t>(threads));
#pragma omp parallel
  {
    auto& local = partial[static_cast<std::size_t>(omp_get_thread_num())];
    local.assign(out.components.size(), Component{width, height, 0, 0, 0, 0});
#pragma omp for schedule(static)
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const std::int64_t p = static_cast<std::int64_t>(y) * width + x;
        const std::int32_t l = out.labels[p];
        if (!l) continue;
        Component& c = local[static_cast<std::size_t>(l - 1)];
        ++c.area;
        c.diff_sum += diff[p];
        c.x_min = std::min(c.x_min, x);
        c.y_min = std::min(c.y_min, y);
        c.x_max = std::max(c.x_max, x + 1);
        c.y_max = std::max(c.y_max, y + 1);
      }
    }
  }
  for (std::size_t k = 0; k < out.components.size(); ++k) {
    Component& c = out.components[k];
    c.area = 0;
    for (const auto& local : partial) {
      if (local.empty()) continue;
      const Component& l = local[k];
      if (l.area == 0) continue;
      c.area += l.area;
      c.diff_sum += l.diff_sum;
      c.x_min = std::min(c.x_min, l.x_min);
      c.y_min = std::min(c.y_min, l.y_min);
      c.x_max = std::max(c.x_max, l.x_max);
      c.y_max = std::max(c.y_max, l.y_max);
    }
  }
  return out;
}

}  // namespace ami::kernels
