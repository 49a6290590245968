#include "cardioseg/preprocess/profile.hpp"

namespace cardioseg::preprocess {

std::string_view to_string(ProfileName p) {
  switch (p) {
    case ProfileName::Legacy: return "legacy";
    case ProfileName::Khened: return "khened";
    case ProfileName::Isensee: return "isensee";
  }
  return "?";
}

ProfileName profile_from_string(std::string_view s) {
  if (s == "legacy") return ProfileName::Legacy;
  if (s == "khened") return ProfileName::Khened;
  if (s == "isensee") return ProfileName::Isensee;
  throw Error(ErrorCode::InvalidConfig, "unknown profile '" + std::string(s) + "'");
}

std::string_view to_string(StepKind k) {
  switch (k) {
    case StepKind::OrientationFlipIfNeeded: return "orientation_flip_if_needed";
    case StepKind::ResampleToUnitSpacing: return "resample_to_unit_spacing";
    case StepKind::CenterCropPad: return "center_crop_pad";
    case StepKind::Clahe: return "clahe";
    case StepKind::MinMaxNormalize: return "minmax_normalize";
    case StepKind::ZScoreNormalize: return "zscore_normalize";
    case StepKind::ZeroMeanNormalize: return "zero_mean_normalize";
    case StepKind::BiasFieldCorrect: return "bias_field_correct";
  }
  return "?";
}

bool is_geometry(StepKind k) {
  return k == StepKind::OrientationFlipIfNeeded || k == StepKind::ResampleToUnitSpacing || k == StepKind::CenterCropPad;
}

PreprocessProfile PreprocessProfile::make(ProfileName name, const ProfileOptions& o) {
  auto step = [&](StepKind k) { return Step{k, o.crop, o.clahe, o.bias_sigma}; };
  PreprocessProfile p{name, {}};
  switch (name) {
    case ProfileName::Legacy:
      p.steps = {step(StepKind::OrientationFlipIfNeeded), step(StepKind::ResampleToUnitSpacing),
                 step(StepKind::CenterCropPad), step(StepKind::Clahe), step(StepKind::MinMaxNormalize)};
      break;
    case ProfileName::Khened:
      p.steps = {step(StepKind::OrientationFlipIfNeeded), step(StepKind::CenterCropPad),
                 step(StepKind::ZScoreNormalize)};
      break;
    case ProfileName::Isensee:
      // bias correction needs non-negative input, so it runs before mean removal
      p.steps = {step(StepKind::CenterCropPad), step(StepKind::BiasFieldCorrect), step(StepKind::ZeroMeanNormalize)};
      break;
  }
  return p;
}

Sample apply_profile(const Sample& s, const PreprocessProfile& p, const DatasetDescriptor& d) {
  Sample out = s;
  for (const auto& step : p.steps) {
    try {
      switch (step.kind) {
        case StepKind::OrientationFlipIfNeeded:
          if (!d.needs_orientation_flip) break;
          out.image = orientation_flip(out.image);
          if (out.mask) out.mask = orientation_flip(*out.mask);
          break;
        case StepKind::ResampleToUnitSpacing:
          out.image = resample_to_unit_spacing(out.image, Interpolation::Bilinear);
          if (out.mask) out.mask = resample_to_unit_spacing(*out.mask);
          break;
        case StepKind::CenterCropPad:
          out.image = center_crop_pad(out.image, step.crop);
          if (out.mask) out.mask = center_crop_pad(*out.mask, step.crop);
          break;
        case StepKind::Clahe: out.image = clahe(out.image, step.clahe); break;
        case StepKind::MinMaxNormalize: out.image = minmax_normalize(out.image); break;
        case StepKind::ZScoreNormalize: out.image = zscore_normalize(out.image); break;
        case StepKind::ZeroMeanNormalize: out.image = zero_mean_normalize(out.image); break;
        case StepKind::BiasFieldCorrect: out.image = bias_field_correct(out.image, step.bias_sigma); break;
      }
    } catch (const Error& e) {
      rethrow_with_context(e, to_string(s.key()) + " " + std::string(to_string(step.kind)));
    }
  }
  return out;
}

std::vector<Sample> apply_profile(std::span<const Sample> samples, const PreprocessProfile& p) {
  std::vector<Sample> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(apply_profile(s, p, descriptor_for(s.dataset)));
  return out;
}

}  // namespace cardioseg::preprocess
