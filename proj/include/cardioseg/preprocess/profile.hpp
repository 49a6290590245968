#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cardioseg/core/sample.hpp"
#include "cardioseg/preprocess/transforms.hpp"

namespace cardioseg::preprocess {

enum class ProfileName { Legacy, Khened, Isensee };

std::string_view to_string(ProfileName p);
ProfileName profile_from_string(std::string_view s);

enum class StepKind {
  OrientationFlipIfNeeded,
  ResampleToUnitSpacing,
  CenterCropPad,
  Clahe,
  MinMaxNormalize,
  ZScoreNormalize,
  ZeroMeanNormalize,
  BiasFieldCorrect,
};

std::string_view to_string(StepKind k);

/// Geometry steps touch both image and mask; the rest are intensity-only.
bool is_geometry(StepKind k);

struct Step {
  StepKind kind;
  int crop = 176;
  ClaheParams clahe{};
  double bias_sigma = 32.0;
};

struct ProfileOptions {
  int crop = 176;
  ClaheParams clahe{};
  double bias_sigma = 32.0;
};

struct PreprocessProfile {
  ProfileName name = ProfileName::Khened;
  std::vector<Step> steps;

  /// legacy:  flip-if-needed, resample 1 mm, crop/pad, CLAHE, min-max
  /// khened:  flip-if-needed, crop/pad, z-score
  /// isensee: crop/pad, bias-field correction, zero mean
  static PreprocessProfile make(ProfileName name, const ProfileOptions& opts = {});
};

/// Runs the profile's steps in order. Masks follow geometry steps with nearest-neighbour
/// sampling and skip intensity steps; the orientation flip only runs when the dataset
/// needs it.
Sample apply_profile(const Sample& s, const PreprocessProfile& p, const DatasetDescriptor& d);

std::vector<Sample> apply_profile(std::span<const Sample> samples, const PreprocessProfile& p);

}  // namespace cardioseg::preprocess
