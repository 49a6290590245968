#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cardioseg/core/error.hpp"

namespace cardioseg {

/// Physical pixel size in millimeters per axis.
struct Spacing {
  double row_mm = 1.0;
  double col_mm = 1.0;

  bool operator==(const Spacing&) const = default;
};

bool is_valid(const Spacing& s);

enum class ClassId : std::uint8_t { Background = 0, RV = 1, LVM = 2, LVC = 3 };

inline constexpr int kNumClasses = 4;

std::string_view to_string(ClassId c);
ClassId class_from_string(std::string_view s);

/// Row-major 2-D grid with physical spacing. Pixel (r, c) sits at index r * width + c.
template <class T>
class Grid {
 public:
  using value_type = T;

  Grid() = default;
  Grid(int height, int width, Spacing spacing = {}, T fill = T{})
      : height_(height), width_(width), spacing_(spacing),
        pixels_(checked_size(height, width), fill) {
    if (!is_valid(spacing)) throw Error(ErrorCode::BadFormat, "pixel spacing must be finite and > 0");
  }
  Grid(int height, int width, Spacing spacing, std::vector<T> pixels)
      : height_(height), width_(width), spacing_(spacing), pixels_(std::move(pixels)) {
    if (pixels_.size() != checked_size(height, width))
      throw Error(ErrorCode::ShapeMismatch, "pixel buffer does not match height x width");
    if (!is_valid(spacing)) throw Error(ErrorCode::BadFormat, "pixel spacing must be finite and > 0");
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t size() const noexcept { return pixels_.size(); }
  bool empty() const noexcept { return pixels_.empty(); }
  const Spacing& spacing() const noexcept { return spacing_; }
  void set_spacing(Spacing s) {
    if (!is_valid(s)) throw Error(ErrorCode::BadFormat, "pixel spacing must be finite and > 0");
    spacing_ = s;
  }

  T& operator()(int r, int c) { return pixels_[static_cast<std::size_t>(r) * width_ + c]; }
  const T& operator()(int r, int c) const { return pixels_[static_cast<std::size_t>(r) * width_ + c]; }

  bool contains(int r, int c) const noexcept { return r >= 0 && c >= 0 && r < height_ && c < width_; }

  std::span<T> pixels() noexcept { return pixels_; }
  std::span<const T> pixels() const noexcept { return pixels_; }
  std::vector<T>& data() noexcept { return pixels_; }
  const std::vector<T>& data() const noexcept { return pixels_; }

  bool same_shape(const auto& other) const noexcept {
    return height_ == other.height() && width_ == other.width();
  }

  bool operator==(const Grid&) const = default;

 private:
  static std::size_t checked_size(int h, int w) {
    if (h < 0 || w < 0) throw Error(ErrorCode::ShapeMismatch, "negative image dimension");
    return static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  }

  int height_ = 0;
  int width_ = 0;
  Spacing spacing_{};
  std::vector<T> pixels_;
};

using ScalarImage2D = Grid<double>;
using LabelMask2D = Grid<std::uint8_t>;

/// Throws InvalidMask unless every value lies in {0,1,2,3}.
void validate_mask(const LabelMask2D& m);

}  // namespace cardioseg
