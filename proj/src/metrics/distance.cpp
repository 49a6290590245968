#include "cardioseg/metrics/distance.hpp"

#include <limits>

namespace cardioseg::metrics {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// 1-D squared distance transform of f (values finite or +inf) with sample step `step` mm.
void transform_1d(const std::vector<double>& f, std::vector<double>& out, double step, std::vector<int>& v,
                  std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  int k = -1;
  const double s2 = step * step;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      k = 0;
      continue;
    }
    double s;
    while (true) {
      const int p = v[k];
      s = ((f[q] + s2 * q * q) - (f[p] + s2 * p * p)) / (2.0 * s2 * (q - p));
      if (s <= z[k] && k > 0) {
        --k;
        continue;
      }
      break;
    }
    if (s <= z[k]) {
      // k == 0 and the new parabola dominates everywhere
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double d = (q - v[j]) * step;
    out[q] = f[v[j]] + d * d;
  }
}

}  // namespace

std::vector<double> squared_distance_transform(std::span<const std::uint8_t> sites, int height, int width,
                                               Spacing spacing) {
  const std::size_t n = static_cast<std::size_t>(height) * width;
  std::vector<double> dist(n);
  for (std::size_t i = 0; i < n; ++i) dist[i] = sites[i] ? 0.0 : kInf;

  const int longest = std::max(height, width);
  std::vector<double> f(longest), out(longest), z(longest + 1);
  std::vector<int> v(longest);

  // columns: distance along the row axis
  f.resize(height);
  out.resize(height);
  for (int c = 0; c < width; ++c) {
    for (int r = 0; r < height; ++r) f[r] = dist[static_cast<std::size_t>(r) * width + c];
    transform_1d(f, out, spacing.row_mm, v, z);
    for (int r = 0; r < height; ++r) dist[static_cast<std::size_t>(r) * width + c] = out[r];
  }
  // rows: add the column-axis term
  f.resize(width);
  out.resize(width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) f[c] = dist[static_cast<std::size_t>(r) * width + c];
    transform_1d(f, out, spacing.col_mm, v, z);
    for (int c = 0; c < width; ++c) dist[static_cast<std::size_t>(r) * width + c] = out[c];
  }
  return dist;
}

}  // namespace cardioseg::metrics
