#include "cardioseg/postprocess/postprocess.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/metrics/distance.hpp"

namespace cardioseg::postprocess {

namespace {

constexpr std::uint8_t kBackground = 0;

}  // namespace

ComponentSet connected_components(const Grid<std::uint8_t>& binary, int connectivity) {
  if (connectivity != 4 && connectivity != 8)
    throw Error(ErrorCode::InvalidConfig, "connectivity must be 4 or 8");
  const int h = binary.height(), w = binary.width();
  ComponentSet cs;
  cs.height = h;
  cs.width = w;
  cs.labels.assign(static_cast<std::size_t>(h) * w, 0);

  static constexpr int kDr[8] = {-1, 1, 0, 0, -1, -1, 1, 1};
  static constexpr int kDc[8] = {0, 0, -1, 1, -1, 1, -1, 1};
  std::vector<std::pair<int, int>> queue;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!binary(r, c) || cs.at(r, c)) continue;
      const int id = static_cast<int>(cs.sizes.size()) + 1;
      double sr = 0, sc = 0;
      std::size_t n = 0;
      queue.assign(1, {r, c});
      cs.labels[static_cast<std::size_t>(r) * w + c] = id;
      for (std::size_t head = 0; head < queue.size(); ++head) {
        const auto [y, x] = queue[head];
        sr += y;
        sc += x;
        ++n;
        for (int k = 0; k < connectivity; ++k) {
          const int ny = y + kDr[k], nx = x + kDc[k];
          if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
          auto& lab = cs.labels[static_cast<std::size_t>(ny) * w + nx];
          if (!binary(ny, nx) || lab) continue;
          lab = id;
          queue.emplace_back(ny, nx);
        }
      }
      cs.sizes.push_back(n);
      cs.centroids.emplace_back(sr / n, sc / n);
    }
  }
  return cs;
}

Grid<std::uint8_t> class_indicator(const LabelMask2D& mask, ClassId cls) {
  Grid<std::uint8_t> out(mask.height(), mask.width(), mask.spacing());
  const auto k = static_cast<std::uint8_t>(cls);
  for (std::size_t i = 0; i < mask.pixels().size(); ++i) out.data()[i] = mask.pixels()[i] == k;
  return out;
}

void PostprocessConfig::validate() const {
  if (!(rv_distance_threshold_mm > 0)) throw Error(ErrorCode::InvalidConfig, "rv_distance_threshold_mm must be > 0");
  if (island_max_size < 1) throw Error(ErrorCode::InvalidConfig, "island_max_size must be >= 1");
}

PostprocessConfig PostprocessConfig::from_config(const Config& cfg, const std::string& section) {
  PostprocessConfig p;
  auto k = [&](const char* key) { return section + "." + key; };
  p.rv_distance_threshold_mm = cfg.get_real(k("rv_distance_threshold_mm"), p.rv_distance_threshold_mm);
  p.island_max_size = cfg.get_int(k("island_max_size"), p.island_max_size);
  p.keep_largest_lvc = cfg.get_bool(k("keep_largest_lvc"), p.keep_largest_lvc);
  p.filter_distant_rv = cfg.get_bool(k("filter_distant_rv"), p.filter_distant_rv);
  p.fill_islands = cfg.get_bool(k("fill_islands"), p.fill_islands);
  p.validate();
  return p;
}

std::string PostprocessConfig::describe() const {
  std::ostringstream os;
  os << "rv_distance_threshold_mm=" << format_real(rv_distance_threshold_mm) << " island_max_size=" << island_max_size
     << " keep_largest_lvc=" << keep_largest_lvc << " filter_distant_rv=" << filter_distant_rv
     << " fill_islands=" << fill_islands;
  return os.str();
}

LabelMask2D keep_largest_lvc(const LabelMask2D& mask) {
  const auto cs = connected_components(class_indicator(mask, ClassId::LVC), 8);
  if (cs.count() <= 1) return mask;
  std::size_t best = 0;
  for (std::size_t k = 1; k < cs.count(); ++k)
    if (cs.sizes[k] > cs.sizes[best]) best = k;
  LabelMask2D out = mask;
  for (std::size_t i = 0; i < cs.labels.size(); ++i)
    if (cs.labels[i] && static_cast<std::size_t>(cs.labels[i] - 1) != best) out.data()[i] = kBackground;
  return out;
}

LabelMask2D filter_distant_rv(const LabelMask2D& mask, const PostprocessConfig& cfg) {
  const auto& px = mask.pixels();
  std::vector<std::uint8_t> lv(px.size());
  bool any_lv = false;
  for (std::size_t i = 0; i < px.size(); ++i) {
    lv[i] = px[i] == static_cast<std::uint8_t>(ClassId::LVM) || px[i] == static_cast<std::uint8_t>(ClassId::LVC);
    any_lv |= lv[i] != 0;
  }
  if (!any_lv) return mask;

  const auto cs = connected_components(class_indicator(mask, ClassId::RV), 8);
  if (cs.count() == 0) return mask;
  const auto dist = metrics::squared_distance_transform(lv, mask.height(), mask.width(), mask.spacing());
  std::vector<double> nearest(cs.count(), std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < px.size(); ++i)
    if (cs.labels[i]) nearest[cs.labels[i] - 1] = std::min(nearest[cs.labels[i] - 1], dist[i]);

  LabelMask2D out = mask;
  for (std::size_t i = 0; i < px.size(); ++i)
    if (cs.labels[i] && std::sqrt(nearest[cs.labels[i] - 1]) > cfg.rv_distance_threshold_mm) out.data()[i] = kBackground;
  return out;
}

LabelMask2D fill_background_islands(const LabelMask2D& mask, const PostprocessConfig& cfg) {
  const int h = mask.height(), w = mask.width();
  const auto cs = connected_components(class_indicator(mask, ClassId::Background), 8);
  std::vector<char> fill(cs.count() + 1, 0);
  for (std::size_t k = 0; k < cs.count(); ++k)
    fill[k + 1] = cs.sizes[k] <= static_cast<std::size_t>(cfg.island_max_size);
  // components touching the border are never islands
  for (int r = 0; r < h; ++r) {
    fill[cs.at(r, 0)] = 0;
    fill[cs.at(r, w - 1)] = 0;
  }
  for (int c = 0; c < w; ++c) {
    fill[cs.at(0, c)] = 0;
    fill[cs.at(h - 1, c)] = 0;
  }
  fill[0] = 0;
  bool any = false;
  for (char f : fill) any |= f != 0;
  if (!any) return mask;

  // nearest class by per-class distance maps; ascending scan with strict < keeps the smaller id on ties
  std::vector<std::vector<double>> dist;
  for (std::uint8_t k = 1; k < kNumClasses; ++k) {
    std::vector<std::uint8_t> sites(mask.pixels().size());
    for (std::size_t i = 0; i < sites.size(); ++i) sites[i] = mask.pixels()[i] == k;
    dist.push_back(metrics::squared_distance_transform(sites, h, w, mask.spacing()));
  }
  LabelMask2D out = mask;
  for (std::size_t i = 0; i < cs.labels.size(); ++i) {
    if (!fill[cs.labels[i]]) continue;
    std::uint8_t best = kBackground;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::uint8_t k = 1; k < kNumClasses; ++k) {
      if (dist[k - 1][i] < best_d) {
        best_d = dist[k - 1][i];
        best = k;
      }
    }
    out.data()[i] = best;
  }
  return out;
}

LabelMask2D run_postprocess(const LabelMask2D& mask, const PostprocessConfig& cfg) {
  cfg.validate();
  LabelMask2D out = mask;
  if (cfg.keep_largest_lvc) out = keep_largest_lvc(out);
  if (cfg.filter_distant_rv) out = filter_distant_rv(out, cfg);
  if (cfg.fill_islands) out = fill_background_islands(out, cfg);
  return out;
}

}  // namespace cardioseg::postprocess
