#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>

#include "cardioseg/core/config.hpp"
#include "cardioseg/core/image.hpp"

namespace cardioseg::augment {

struct Range {
  double lo = 0;
  double hi = 0;
};

/// Defaults are the training-time ranges: rotation +-5 degrees, translation +-5 px,
/// zoom 0.8..1.2, both flip axes permitted, half of the images augmented.
struct AugmentParams {
  Range rotation_deg{-5, 5};
  Range translation_x{-5, 5};
  Range translation_y{-5, 5};
  Range zoom{0.8, 1.2};
  bool flip_horizontal = true;
  bool flip_vertical = true;
  double probability = 0.5;

  void validate() const;
  /// Reads an [augment] section: rotation_lo/hi, translation_x_lo/hi, translation_y_lo/hi,
  /// zoom_lo/hi, flip_horizontal, flip_vertical, probability.
  static AugmentParams from_config(const Config& cfg, const std::string& section = "augment");
};

struct AugmentSpec {
  bool apply = false;
  double rotation_deg = 0;  // positive turns clockwise on screen (rows grow downward)
  double tx = 0;            // columns
  double ty = 0;            // rows
  double zoom = 1;
  bool flip_h = false;
  bool flip_v = false;
  std::uint64_t rng_seed_trace = 0;  // first raw draw of this spec; identifies the stream position

  bool is_identity() const;
  std::string describe() const;
};

using Rng = std::mt19937_64;

/// Independent stream for sample `index` under a run-level seed.
Rng stream_for(std::uint64_t seed, std::uint64_t index);

/// One coin flip gates the whole bundle. When it comes up, each parameter is drawn
/// uniformly from its range (rotation, tx, ty, zoom, then the two flip coins).
AugmentSpec sample_augmentation(Rng& rng, const AugmentParams& p);

/// Maps output pixel (r, c) back to its source coordinate under `spec`
/// (inverse of flip -> zoom about center -> rotate about center -> translate).
std::pair<double, double> source_coordinate(const AugmentSpec& spec, int height, int width, int r, int c);

/// Image: bilinear; mask: nearest. Regions mapped from outside the frame become 0.
/// An identity spec returns bit-identical copies.
std::pair<ScalarImage2D, std::optional<LabelMask2D>> apply_augmentation(const ScalarImage2D& img,
                                                                        const std::optional<LabelMask2D>& mask,
                                                                        const AugmentSpec& spec);

}  // namespace cardioseg::augment
