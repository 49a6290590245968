#pragma once

#include <string_view>
#include <vector>

#include "cardioseg/core/image.hpp"

namespace cardioseg::ingest {

struct Point {
  double x = 0;  // column axis, pixel units
  double y = 0;  // row axis, pixel units
};

/// Closed contour with at least three vertices.
class Polygon {
 public:
  explicit Polygon(std::vector<Point> vertices);

  const std::vector<Point>& vertices() const noexcept { return vertices_; }
  std::size_t size() const noexcept { return vertices_.size(); }

 private:
  std::vector<Point> vertices_;
};

/// One "x y" pair per non-empty line. MalformedLine messages carry the 1-based line number.
Polygon parse_contour_file(std::string_view text);

/// Even-odd point-in-polygon test.
bool contains(const Polygon& p, Point q);

/// Sets pixel (r, c) to `cls` iff its center (c + 0.5, r + 0.5) lies inside `p`
/// under the even-odd rule. Scanline fill; crossings are computed per row.
LabelMask2D rasterize_polygon(const Polygon& p, int height, int width, ClassId cls, Spacing spacing = {});

/// Anatomical composition of endo/epi contours: epi fill minus endo fill becomes LVM,
/// endo fill becomes LVC. Either contour may be absent.
LabelMask2D compose_lv_mask(const Polygon* endo, const Polygon* epi, int height, int width, Spacing spacing);

}  // namespace cardioseg::ingest
