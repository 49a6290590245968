#pragma once

// Brute-force reference implementations used to check the library. None of these
// share code with src/; they are deliberately slow and direct.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <utility>
#include <vector>

#include "cardioseg/core/image.hpp"

namespace oracle {

using cardioseg::ClassId;
using cardioseg::LabelMask2D;
using cardioseg::Spacing;

inline std::set<std::pair<int, int>> pixel_set(const LabelMask2D& m, ClassId cls) {
  std::set<std::pair<int, int>> s;
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m(r, c) == static_cast<std::uint8_t>(cls)) s.insert({r, c});
  return s;
}

inline double dice(const LabelMask2D& a, const LabelMask2D& b, ClassId cls) {
  const auto A = pixel_set(a, cls), B = pixel_set(b, cls);
  if (A.empty() && B.empty()) return 1.0;
  std::size_t inter = 0;
  for (const auto& p : A) inter += B.count(p);
  return 2.0 * static_cast<double>(inter) / static_cast<double>(A.size() + B.size());
}

inline double sq_mm(std::pair<int, int> p, std::pair<int, int> q, Spacing s) {
  const double dr = (p.first - q.first) * s.row_mm, dc = (p.second - q.second) * s.col_mm;
  return dr * dr + dc * dc;
}

/// max over P of min over G, on squared millimetres.
inline double directed_sq(const std::set<std::pair<int, int>>& P, const std::set<std::pair<int, int>>& G, Spacing s) {
  double worst = 0;
  for (const auto& p : P) {
    double best = std::numeric_limits<double>::infinity();
    for (const auto& g : G) best = std::min(best, sq_mm(p, g, s));
    worst = std::max(worst, best);
  }
  return worst;
}

inline double hausdorff_sq(const LabelMask2D& a, const LabelMask2D& b, ClassId cls, Spacing s) {
  const auto A = pixel_set(a, cls), B = pixel_set(b, cls);
  return std::max(directed_sq(A, B, s), directed_sq(B, A, s));
}

/// Iterative flood fill in raster order; labels start at 1.
inline std::vector<int> flood_fill_labels(const std::vector<std::uint8_t>& on, int h, int w, int connectivity) {
  std::vector<int> lab(on.size(), 0);
  int next = 0;
  for (int r0 = 0; r0 < h; ++r0) {
    for (int c0 = 0; c0 < w; ++c0) {
      if (!on[r0 * w + c0] || lab[r0 * w + c0]) continue;
      ++next;
      std::vector<std::pair<int, int>> stack{{r0, c0}};
      lab[r0 * w + c0] = next;
      while (!stack.empty()) {
        auto [r, c] = stack.back();
        stack.pop_back();
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            if (connectivity == 4 && dr != 0 && dc != 0) continue;
            const int rr = r + dr, cc = c + dc;
            if (rr < 0 || cc < 0 || rr >= h || cc >= w) continue;
            if (on[rr * w + cc] && !lab[rr * w + cc]) {
              lab[rr * w + cc] = next;
              stack.push_back({rr, cc});
            }
          }
        }
      }
    }
  }
  return lab;
}

struct Pt {
  double x, y;
};

/// Crossing-number test along a ray towards +x.
inline bool inside(const std::vector<Pt>& poly, Pt q) {
  int crossings = 0;
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Pt a = poly[i], b = poly[(i + 1) % n];
    const bool straddles = (a.y <= q.y && b.y > q.y) || (b.y <= q.y && a.y > q.y);
    if (!straddles) continue;
    const double x_at = a.x + (q.y - a.y) * (b.x - a.x) / (b.y - a.y);
    if (x_at > q.x) ++crossings;
  }
  return crossings % 2 == 1;
}

/// Star-shaped polygon around (cx, cy); `concave` alternates the radius to make dents.
inline std::vector<Pt> random_polygon(std::mt19937_64& rng, double cx, double cy, double rmax, bool concave) {
  std::uniform_int_distribution<int> nv(3, 14);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = nv(rng);
  std::vector<double> angles;
  for (int i = 0; i < n; ++i) angles.push_back(u(rng) * 2 * std::numbers::pi);
  std::sort(angles.begin(), angles.end());
  std::vector<Pt> pts;
  for (int i = 0; i < n; ++i) {
    double r = rmax;
    if (concave) r *= (i % 2 ? 0.25 + 0.35 * u(rng) : 0.7 + 0.3 * u(rng));
    pts.push_back({cx + r * std::cos(angles[i]), cy + r * std::sin(angles[i])});
  }
  return pts;
}

/// Nearest non-background class by exhaustive search; ties go to the smaller id.
inline std::uint8_t nearest_class(const LabelMask2D& m, int r, int c) {
  double best = std::numeric_limits<double>::infinity();
  std::uint8_t cls = 0;
  for (int rr = 0; rr < m.height(); ++rr) {
    for (int cc = 0; cc < m.width(); ++cc) {
      const std::uint8_t v = m(rr, cc);
      if (!v) continue;
      const double d = sq_mm({r, c}, {rr, cc}, m.spacing());
      if (d < best || (d == best && v < cls)) {
        best = d;
        cls = v;
      }
    }
  }
  return cls;
}

inline LabelMask2D random_mask(std::mt19937_64& rng, int h, int w, double density, Spacing s = {}) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> cls(1, 3);
  LabelMask2D m(h, w, s);
  for (auto& v : m.data()) v = u(rng) < density ? static_cast<std::uint8_t>(cls(rng)) : 0;
  return m;
}

}  // namespace oracle
