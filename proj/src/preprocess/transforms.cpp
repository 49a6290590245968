#include "cardioseg/preprocess/transforms.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cardioseg::preprocess {

namespace {

struct OutputDims {
  int height, width;
};

OutputDims unit_dims(int h, int w, Spacing s) {
  const long oh = std::lround(h * s.row_mm);
  const long ow = std::lround(w * s.col_mm);
  if (oh <= 0 || ow <= 0)
    throw Error(ErrorCode::DegenerateOutput, "resampled size " + std::to_string(oh) + "x" + std::to_string(ow));
  return {static_cast<int>(oh), static_cast<int>(ow)};
}

double source_coord(int i, double spacing) { return (i + 0.5) / spacing - 0.5; }

std::pair<double, double> mean_and_std(const ScalarImage2D& img) {
  const double n = static_cast<double>(img.size());
  const double mean = std::accumulate(img.data().begin(), img.data().end(), 0.0) / n;
  double ss = 0;
  for (double v : img.data()) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / n)};
}

}  // namespace

ScalarImage2D resample_to_unit_spacing(const ScalarImage2D& img, Interpolation interp) {
  const auto [oh, ow] = unit_dims(img.height(), img.width(), img.spacing());
  const Spacing s = img.spacing();
  ScalarImage2D out(oh, ow, Spacing{1.0, 1.0});
  const int h = img.height(), w = img.width();
  for (int r = 0; r < oh; ++r) {
    const double y = std::clamp(source_coord(r, s.row_mm), 0.0, static_cast<double>(h - 1));
    for (int c = 0; c < ow; ++c) {
      const double x = std::clamp(source_coord(c, s.col_mm), 0.0, static_cast<double>(w - 1));
      if (interp == Interpolation::Nearest) {
        out(r, c) = img(static_cast<int>(std::floor(y + 0.5)), static_cast<int>(std::floor(x + 0.5)));
        continue;
      }
      const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      const int y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
      const double fy = y - y0, fx = x - x0;
      if (fy == 0 && fx == 0) {
        out(r, c) = img(y0, x0);
        continue;
      }
      out(r, c) = (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) + fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
    }
  }
  return out;
}

LabelMask2D resample_to_unit_spacing(const LabelMask2D& mask) {
  const auto [oh, ow] = unit_dims(mask.height(), mask.width(), mask.spacing());
  const Spacing s = mask.spacing();
  LabelMask2D out(oh, ow, Spacing{1.0, 1.0});
  for (int r = 0; r < oh; ++r) {
    const double y = std::clamp(source_coord(r, s.row_mm), 0.0, static_cast<double>(mask.height() - 1));
    for (int c = 0; c < ow; ++c) {
      const double x = std::clamp(source_coord(c, s.col_mm), 0.0, static_cast<double>(mask.width() - 1));
      out(r, c) = mask(static_cast<int>(std::floor(y + 0.5)), static_cast<int>(std::floor(x + 0.5)));
    }
  }
  return out;
}

ScalarImage2D minmax_normalize(const ScalarImage2D& img) {
  ScalarImage2D out(img.height(), img.width(), img.spacing());
  if (img.empty()) return out;
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  const double range = *hi - *lo;
  if (range == 0) return out;
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = (img.data()[i] - *lo) / range;
  return out;
}

ScalarImage2D zscore_normalize(const ScalarImage2D& img) {
  ScalarImage2D out(img.height(), img.width(), img.spacing());
  if (img.empty()) return out;
  const auto [mean, sd] = mean_and_std(img);
  if (sd == 0) return out;
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = (img.data()[i] - mean) / sd;
  return out;
}

ScalarImage2D zero_mean_normalize(const ScalarImage2D& img) {
  ScalarImage2D out(img.height(), img.width(), img.spacing());
  if (img.empty()) return out;
  const double mean = std::accumulate(img.data().begin(), img.data().end(), 0.0) / static_cast<double>(img.size());
  for (std::size_t i = 0; i < img.size(); ++i) out.data()[i] = img.data()[i] - mean;
  return out;
}

ScalarImage2D clahe(const ScalarImage2D& img, const ClaheParams& p) {
  if (p.tile_rows < 1 || p.tile_cols < 1) throw Error(ErrorCode::InvalidConfig, "CLAHE tile grid must be >= 1x1");
  if (!(p.clip_limit > 0)) throw Error(ErrorCode::InvalidConfig, "CLAHE clip limit must be > 0");
  constexpr int kBins = 256;
  const int h = img.height(), w = img.width();
  ScalarImage2D out(h, w, img.spacing(), 0.5);
  if (img.empty()) return out;
  const auto [lo_it, hi_it] = std::minmax_element(img.data().begin(), img.data().end());
  const double lo = *lo_it, range = *hi_it - *lo_it;
  if (range == 0) return out;

  const int gr = std::min(p.tile_rows, h), gc = std::min(p.tile_cols, w);
  std::vector<int> bin(img.size());
  for (std::size_t i = 0; i < img.size(); ++i)
    bin[i] = std::min(kBins - 1, static_cast<int>((img.data()[i] - lo) / range * kBins));

  // mapping[tile][bin] in [0, 1]
  std::vector<std::vector<double>> mapping(static_cast<std::size_t>(gr) * gc, std::vector<double>(kBins));
  for (int ti = 0; ti < gr; ++ti) {
    const int r0 = ti * h / gr, r1 = (ti + 1) * h / gr;
    for (int tj = 0; tj < gc; ++tj) {
      const int c0 = tj * w / gc, c1 = (tj + 1) * w / gc;
      std::vector<double> hist(kBins, 0.0);
      for (int r = r0; r < r1; ++r)
        for (int c = c0; c < c1; ++c) hist[bin[static_cast<std::size_t>(r) * w + c]] += 1.0;
      const double npx = static_cast<double>(r1 - r0) * (c1 - c0);
      if (std::isfinite(p.clip_limit)) {
        const double clip = p.clip_limit * npx / kBins;
        double excess = 0;
        for (auto& v : hist) {
          if (v > clip) {
            excess += v - clip;
            v = clip;
          }
        }
        for (auto& v : hist) v += excess / kBins;
      }
      auto& map = mapping[static_cast<std::size_t>(ti) * gc + tj];
      double cdf = 0;
      for (int b = 0; b < kBins; ++b) {
        cdf += hist[b];
        map[b] = std::min(1.0, cdf / npx);
      }
    }
  }

  const double tile_h = static_cast<double>(h) / gr, tile_w = static_cast<double>(w) / gc;
  for (int r = 0; r < h; ++r) {
    const double ty = std::clamp((r + 0.5) / tile_h - 0.5, 0.0, gr - 1.0);
    const int i0 = static_cast<int>(std::floor(ty)), i1 = std::min(i0 + 1, gr - 1);
    const double wy = ty - i0;
    for (int c = 0; c < w; ++c) {
      const double tx = std::clamp((c + 0.5) / tile_w - 0.5, 0.0, gc - 1.0);
      const int j0 = static_cast<int>(std::floor(tx)), j1 = std::min(j0 + 1, gc - 1);
      const double wx = tx - j0;
      const int b = bin[static_cast<std::size_t>(r) * w + c];
      auto m = [&](int i, int j) { return mapping[static_cast<std::size_t>(i) * gc + j][b]; };
      out(r, c) = (1 - wy) * ((1 - wx) * m(i0, j0) + wx * m(i0, j1)) + wy * ((1 - wx) * m(i1, j0) + wx * m(i1, j1));
    }
  }
  return out;
}

ScalarImage2D gaussian_blur(const ScalarImage2D& img, double sigma) {
  if (!(sigma > 0)) throw Error(ErrorCode::InvalidConfig, "blur sigma must be > 0");
  const int radius = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> k(2 * radius + 1);
  for (int i = -radius; i <= radius; ++i) k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));

  const int h = img.height(), w = img.width();
  // normalized convolution: blur(x) / blur(1) along each axis
  auto pass = [&](const std::vector<double>& src, bool along_rows) {
    std::vector<double> dst(src.size());
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        double acc = 0, norm = 0;
        for (int d = -radius; d <= radius; ++d) {
          const int rr = along_rows ? r + d : r, cc = along_rows ? c : c + d;
          if (rr < 0 || rr >= h || cc < 0 || cc >= w) continue;
          acc += k[d + radius] * src[static_cast<std::size_t>(rr) * w + cc];
          norm += k[d + radius];
        }
        dst[static_cast<std::size_t>(r) * w + c] = acc / norm;
      }
    }
    return dst;
  };
  auto tmp = pass(img.data(), false);
  return ScalarImage2D(h, w, img.spacing(), pass(tmp, true));
}

ScalarImage2D bias_field_correct(const ScalarImage2D& img, double smoothing_sigma) {
  if (img.empty()) return img;
  const auto [lo, hi] = std::minmax_element(img.data().begin(), img.data().end());
  if (*lo < 0) throw Error(ErrorCode::BadFormat, "bias field correction needs non-negative intensities");
  if (*hi == 0) throw Error(ErrorCode::AllZeroImage, "cannot estimate a bias field on an all-zero image");
  const double floor_value = 1e-6 * *hi;
  const auto bias = gaussian_blur(img, smoothing_sigma);
  ScalarImage2D out(img.height(), img.width(), img.spacing());
  double in_sum = 0, out_sum = 0;
  for (std::size_t i = 0; i < img.size(); ++i) {
    out.data()[i] = img.data()[i] / std::max(bias.data()[i], floor_value);
    in_sum += img.data()[i];
    out_sum += out.data()[i];
  }
  const double scale = in_sum / out_sum;
  for (auto& v : out.data()) v *= scale;
  return out;
}

}  // namespace cardioseg::preprocess
