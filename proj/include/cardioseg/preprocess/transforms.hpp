#pragma once

#include <limits>

#include "cardioseg/core/image.hpp"

namespace cardioseg::preprocess {

/// 180-degree rotation: (r, c) -> (H-1-r, W-1-c).
template <class T>
Grid<T> orientation_flip(const Grid<T>& in) {
  Grid<T> out(in.height(), in.width(), in.spacing());
  const std::size_t n = in.size();
  for (std::size_t i = 0; i < n; ++i) out.data()[n - 1 - i] = in.data()[i];
  return out;
}

/// Output is target x target. A larger axis keeps a centered window, a smaller one
/// is zero padded; when the margin is odd the extra pixel falls on the trailing side.
template <class T>
Grid<T> center_crop_pad(const Grid<T>& in, int target) {
  if (target <= 0) throw Error(ErrorCode::InvalidConfig, "crop target must be positive");
  Grid<T> out(target, target, in.spacing());
  // source index = output index + offset; offset < 0 means padding
  const int off_r = in.height() >= target ? (in.height() - target) / 2 : -((target - in.height()) / 2);
  const int off_c = in.width() >= target ? (in.width() - target) / 2 : -((target - in.width()) / 2);
  for (int r = 0; r < target; ++r) {
    const int sr = r + off_r;
    if (sr < 0 || sr >= in.height()) continue;
    for (int c = 0; c < target; ++c) {
      const int sc = c + off_c;
      if (sc >= 0 && sc < in.width()) out(r, c) = in(sr, sc);
    }
  }
  return out;
}

enum class Interpolation { Bilinear, Nearest };

/// Resamples to 1 mm x 1 mm. Output dims are round(dim x spacing) per axis; output
/// pixel i samples input coordinate (i + 0.5) / spacing - 0.5 with edge clamping.
ScalarImage2D resample_to_unit_spacing(const ScalarImage2D& img, Interpolation interp = Interpolation::Bilinear);
/// Masks always use nearest-neighbour sampling.
LabelMask2D resample_to_unit_spacing(const LabelMask2D& mask);

/// (x - min) / (max - min); a constant image maps to all zeros.
ScalarImage2D minmax_normalize(const ScalarImage2D& img);
/// (x - mean) / population std; a constant image maps to all zeros.
ScalarImage2D zscore_normalize(const ScalarImage2D& img);
ScalarImage2D zero_mean_normalize(const ScalarImage2D& img);

struct ClaheParams {
  int tile_rows = 8;
  int tile_cols = 8;
  double clip_limit = 2.0;  // infinity disables clipping
};

/// Contrast-limited adaptive histogram equalization.
///
/// Per tile: 256-bin histogram over the image's global [min, max], bins clipped at
/// clip_limit * tile_pixels / 256 with the excess spread evenly over all bins, and the
/// mapping bin -> CDF(bin) / tile_pixels. Mappings are bilinearly interpolated between
/// tile centers. Output lies in [0, 1]; a constant image maps to 0.5.
ScalarImage2D clahe(const ScalarImage2D& img, const ClaheParams& params = {});

/// Separable Gaussian blur, normalized at the borders so constant images are preserved.
ScalarImage2D gaussian_blur(const ScalarImage2D& img, double sigma);

/// Homomorphic bias-field correction: divides by a Gaussian-blurred copy of the image
/// (floored at 1e-6 x image max) and rescales to the original mean. Needs x >= 0.
ScalarImage2D bias_field_correct(const ScalarImage2D& img, double smoothing_sigma = 32.0);

}  // namespace cardioseg::preprocess
