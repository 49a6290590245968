#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cardioseg/core/image.hpp"

namespace cardioseg::metrics {

struct Pixel {
  int row = 0;
  int col = 0;

  auto operator<=>(const Pixel&) const = default;
};

/// Squared physical distance between pixel centers: (dr*row_mm)^2 + (dc*col_mm)^2.
inline double squared_mm(Pixel a, Pixel b, Spacing s) {
  const double dr = (a.row - b.row) * s.row_mm;
  const double dc = (a.col - b.col) * s.col_mm;
  return dr * dr + dc * dc;
}

/// Exact squared Euclidean distance transform (lower envelope of parabolas, one
/// pass per axis). Entry i holds the squared mm distance from pixel i to the nearest
/// nonzero entry of `sites`, or +infinity when `sites` is all zero.
std::vector<double> squared_distance_transform(std::span<const std::uint8_t> sites, int height, int width,
                                               Spacing spacing);

}  // namespace cardioseg::metrics
