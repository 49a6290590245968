#include "cardioseg/augment/augment.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "cardioseg/core/bytes.hpp"

namespace cardioseg::augment {

namespace {

double unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double draw(Rng& rng, Range r) { return r.lo + (r.hi - r.lo) * unit(rng); }

void check_range(const Range& r, const char* name) {
  if (!(std::isfinite(r.lo) && std::isfinite(r.hi) && r.lo <= r.hi))
    throw Error(ErrorCode::InvalidConfig, std::string(name) + " range must satisfy lo <= hi");
}

}  // namespace

void AugmentParams::validate() const {
  check_range(rotation_deg, "rotation");
  check_range(translation_x, "translation_x");
  check_range(translation_y, "translation_y");
  check_range(zoom, "zoom");
  if (!(zoom.lo > 0)) throw Error(ErrorCode::InvalidConfig, "zoom must be positive");
  if (!(probability >= 0 && probability <= 1)) throw Error(ErrorCode::InvalidConfig, "probability must lie in [0,1]");
}

AugmentParams AugmentParams::from_config(const Config& cfg, const std::string& section) {
  AugmentParams p;
  auto k = [&](const char* key) { return section + "." + key; };
  p.rotation_deg = {cfg.get_real(k("rotation_lo"), p.rotation_deg.lo), cfg.get_real(k("rotation_hi"), p.rotation_deg.hi)};
  p.translation_x = {cfg.get_real(k("translation_x_lo"), p.translation_x.lo),
                     cfg.get_real(k("translation_x_hi"), p.translation_x.hi)};
  p.translation_y = {cfg.get_real(k("translation_y_lo"), p.translation_y.lo),
                     cfg.get_real(k("translation_y_hi"), p.translation_y.hi)};
  p.zoom = {cfg.get_real(k("zoom_lo"), p.zoom.lo), cfg.get_real(k("zoom_hi"), p.zoom.hi)};
  p.flip_horizontal = cfg.get_bool(k("flip_horizontal"), p.flip_horizontal);
  p.flip_vertical = cfg.get_bool(k("flip_vertical"), p.flip_vertical);
  p.probability = cfg.get_real(k("probability"), p.probability);
  p.validate();
  return p;
}

bool AugmentSpec::is_identity() const {
  return !apply || (rotation_deg == 0 && tx == 0 && ty == 0 && zoom == 1 && !flip_h && !flip_v);
}

std::string AugmentSpec::describe() const {
  std::ostringstream os;
  os << "apply=" << (apply ? 1 : 0) << " rotation=" << format_real(rotation_deg) << " tx=" << format_real(tx)
     << " ty=" << format_real(ty) << " zoom=" << format_real(zoom) << " flip_h=" << flip_h << " flip_v=" << flip_v
     << " trace=" << rng_seed_trace;
  return os.str();
}

Rng stream_for(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return Rng(seq);
}

AugmentSpec sample_augmentation(Rng& rng, const AugmentParams& p) {
  AugmentSpec s;
  s.rng_seed_trace = rng();
  const double coin = static_cast<double>(s.rng_seed_trace >> 11) * 0x1.0p-53;
  if (!(coin < p.probability)) return s;
  s.apply = true;
  s.rotation_deg = draw(rng, p.rotation_deg);
  s.tx = draw(rng, p.translation_x);
  s.ty = draw(rng, p.translation_y);
  s.zoom = draw(rng, p.zoom);
  const bool h = unit(rng) < 0.5;
  const bool v = unit(rng) < 0.5;
  s.flip_h = p.flip_horizontal && h;
  s.flip_v = p.flip_vertical && v;
  return s;
}

std::pair<double, double> source_coordinate(const AugmentSpec& spec, int height, int width, int r, int c) {
  const double cy = (height - 1) / 2.0, cx = (width - 1) / 2.0;
  const double a = (c - cx) - spec.tx;
  const double b = (r - cy) - spec.ty;
  const double theta = spec.rotation_deg * std::numbers::pi / 180.0;
  const double ct = std::cos(theta), st = std::sin(theta);
  double u = (a * ct + b * st) / spec.zoom;
  double v = (-a * st + b * ct) / spec.zoom;
  if (spec.flip_h) u = -u;
  if (spec.flip_v) v = -v;
  return {v + cy, u + cx};
}

std::pair<ScalarImage2D, std::optional<LabelMask2D>> apply_augmentation(const ScalarImage2D& img,
                                                                        const std::optional<LabelMask2D>& mask,
                                                                        const AugmentSpec& spec) {
  if (mask && !mask->same_shape(img)) throw Error(ErrorCode::ShapeMismatch, "mask and image dimensions differ");
  if (spec.is_identity()) return {img, mask};

  const int h = img.height(), w = img.width();
  ScalarImage2D out(h, w, img.spacing());
  std::optional<LabelMask2D> out_mask;
  if (mask) out_mask.emplace(h, w, mask->spacing());

  auto pixel = [&](int y, int x) { return (y >= 0 && y < h && x >= 0 && x < w) ? img(y, x) : 0.0; };
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const auto [y, x] = source_coordinate(spec, h, w, r, c);
      const int y0 = static_cast<int>(std::floor(y)), x0 = static_cast<int>(std::floor(x));
      const double fy = y - y0, fx = x - x0;
      if (fy == 0 && fx == 0) {
        out(r, c) = pixel(y0, x0);
      } else {
        out(r, c) = (1 - fy) * ((1 - fx) * pixel(y0, x0) + fx * pixel(y0, x0 + 1)) +
                    fy * ((1 - fx) * pixel(y0 + 1, x0) + fx * pixel(y0 + 1, x0 + 1));
      }
      if (out_mask) {
        const int yn = static_cast<int>(std::floor(y + 0.5)), xn = static_cast<int>(std::floor(x + 0.5));
        (*out_mask)(r, c) = (yn >= 0 && yn < h && xn >= 0 && xn < w) ? (*mask)(yn, xn) : 0;
      }
    }
  }
  return {std::move(out), std::move(out_mask)};
}

}  // namespace cardioseg::augment
