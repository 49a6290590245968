#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cardioseg/core/config.hpp"
#include "cardioseg/core/image.hpp"

namespace cardioseg::postprocess {

struct ComponentSet {
  int height = 0;
  int width = 0;
  std::vector<int> labels;  // 0 = not in the set, else 1..K
  std::vector<std::size_t> sizes;                  // index k-1
  std::vector<std::pair<double, double>> centroids;  // (row, col), index k-1

  std::size_t count() const { return sizes.size(); }
  int at(int r, int c) const { return labels[static_cast<std::size_t>(r) * width + c]; }
};

/// Labels are assigned in order of first raster-order encounter.
ComponentSet connected_components(const Grid<std::uint8_t>& binary, int connectivity = 8);

/// Convenience: binary grid of pixels equal to `cls`.
Grid<std::uint8_t> class_indicator(const LabelMask2D& mask, ClassId cls);

struct PostprocessConfig {
  double rv_distance_threshold_mm = 30.0;
  int island_max_size = 50;
  bool keep_largest_lvc = true;
  bool filter_distant_rv = true;
  bool fill_islands = true;

  void validate() const;
  static PostprocessConfig from_config(const Config& cfg, const std::string& section = "postprocess");
  std::string describe() const;
};

LabelMask2D keep_largest_lvc(const LabelMask2D& mask);
LabelMask2D filter_distant_rv(const LabelMask2D& mask, const PostprocessConfig& cfg);
LabelMask2D fill_background_islands(const LabelMask2D& mask, const PostprocessConfig& cfg);

/// keep_largest_lvc, then filter_distant_rv, then fill_background_islands, each if enabled.
LabelMask2D run_postprocess(const LabelMask2D& mask, const PostprocessConfig& cfg);

}  // namespace cardioseg::postprocess
