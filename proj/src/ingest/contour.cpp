#include "cardioseg/ingest/contour.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace cardioseg::ingest {

namespace {

bool parse_double(std::string_view tok, double& out) {
  auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  return ec == std::errc() && p == tok.data() + tok.size() && std::isfinite(out);
}

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> toks;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) toks.push_back(line.substr(i, j - i));
    i = j;
  }
  return toks;
}

}  // namespace

Polygon::Polygon(std::vector<Point> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3)
    throw Error(ErrorCode::TooFewPoints, "polygon needs at least 3 vertices, got " + std::to_string(vertices_.size()));
}

Polygon parse_contour_file(std::string_view text) {
  std::vector<Point> pts;
  int lineno = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++lineno;
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    Point p;
    if (toks.size() != 2 || !parse_double(toks[0], p.x) || !parse_double(toks[1], p.y))
      throw Error(ErrorCode::MalformedLine, "line " + std::to_string(lineno) + ": '" + std::string(line) + "'");
    pts.push_back(p);
  }
  return Polygon(std::move(pts));
}

bool contains(const Polygon& p, Point q) {
  bool inside = false;
  const auto& v = p.vertices();
  for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
    if ((v[i].y > q.y) != (v[j].y > q.y)) {
      const double x = v[j].x + (q.y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y);
      if (q.x < x) inside = !inside;
    }
  }
  return inside;
}

LabelMask2D rasterize_polygon(const Polygon& p, int height, int width, ClassId cls, Spacing spacing) {
  if (cls == ClassId::Background) throw Error(ErrorCode::InvalidMask, "rasterize class must be RV, LVM or LVC");
  LabelMask2D m(height, width, spacing);
  const auto& v = p.vertices();
  std::vector<double> xs;
  for (int r = 0; r < height; ++r) {
    const double y = r + 0.5;
    xs.clear();
    // same half-open edge rule and intersection formula as contains()
    for (std::size_t i = 0, j = v.size() - 1; i < v.size(); j = i++) {
      if ((v[i].y > y) != (v[j].y > y))
        xs.push_back(v[j].x + (y - v[j].y) * (v[i].x - v[j].x) / (v[i].y - v[j].y));
    }
    std::sort(xs.begin(), xs.end());
    // a center x is inside iff an odd number of crossings lie strictly to its right
    for (std::size_t k = 0; k + 1 < xs.size(); k += 2) {
      // centers with xs[k] <= x < xs[k+1]
      const int c0 = std::max(0, static_cast<int>(std::ceil(xs[k] - 0.5)));
      const int c1 = std::min(width - 1, static_cast<int>(std::ceil(xs[k + 1] - 0.5)) - 1);
      for (int c = c0; c <= c1; ++c) m(r, c) = static_cast<std::uint8_t>(cls);
    }
  }
  return m;
}

LabelMask2D compose_lv_mask(const Polygon* endo, const Polygon* epi, int height, int width, Spacing spacing) {
  LabelMask2D out(height, width, spacing);
  if (epi) {
    auto e = rasterize_polygon(*epi, height, width, ClassId::LVM, spacing);
    out = std::move(e);
  }
  if (endo) {
    auto n = rasterize_polygon(*endo, height, width, ClassId::LVC, spacing);
    for (std::size_t i = 0; i < out.size(); ++i)
      if (n.data()[i]) out.data()[i] = static_cast<std::uint8_t>(ClassId::LVC);
  }
  return out;
}

}  // namespace cardioseg::ingest
