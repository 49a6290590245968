#include "cardioseg/core/image.hpp"

#include <cmath>

#include "cardioseg/core/sample.hpp"

namespace cardioseg {

bool is_valid(const Spacing& s) {
  return std::isfinite(s.row_mm) && std::isfinite(s.col_mm) && s.row_mm > 0 && s.col_mm > 0;
}

std::string_view to_string(ClassId c) {
  switch (c) {
    case ClassId::Background: return "BG";
    case ClassId::RV: return "RV";
    case ClassId::LVM: return "LVM";
    case ClassId::LVC: return "LVC";
  }
  return "?";
}

ClassId class_from_string(std::string_view s) {
  if (s == "BG") return ClassId::Background;
  if (s == "RV") return ClassId::RV;
  if (s == "LVM") return ClassId::LVM;
  if (s == "LVC") return ClassId::LVC;
  throw Error(ErrorCode::BadFormat, "unknown class '" + std::string(s) + "'");
}

void validate_mask(const LabelMask2D& m) {
  for (auto v : m.pixels()) {
    if (v >= kNumClasses)
      throw Error(ErrorCode::InvalidMask, "mask value " + std::to_string(v) + " outside {0,1,2,3}");
  }
}

std::string_view to_string(DatasetName d) {
  switch (d) {
    case DatasetName::ACDC: return "ACDC";
    case DatasetName::SB: return "SB";
    case DatasetName::RV: return "RV";
    case DatasetName::LV: return "LV";
  }
  return "?";
}

std::string_view to_string(Phase p) {
  switch (p) {
    case Phase::ED: return "ED";
    case Phase::ES: return "ES";
    case Phase::Unknown: return "unknown";
  }
  return "?";
}

DatasetName dataset_from_string(std::string_view s) {
  if (s == "ACDC") return DatasetName::ACDC;
  if (s == "SB") return DatasetName::SB;
  if (s == "RV") return DatasetName::RV;
  if (s == "LV") return DatasetName::LV;
  throw Error(ErrorCode::MissingDataset, "unknown dataset '" + std::string(s) + "'");
}

Phase phase_from_string(std::string_view s) {
  if (s == "ED") return Phase::ED;
  if (s == "ES") return Phase::ES;
  if (s == "unknown" || s.empty()) return Phase::Unknown;
  throw Error(ErrorCode::BadFormat, "unknown phase '" + std::string(s) + "'");
}

DatasetDescriptor descriptor_for(DatasetName d) {
  switch (d) {
    case DatasetName::ACDC:
      return {d, FileFormat::Nifti, true, {ClassId::RV, ClassId::LVM, ClassId::LVC}};
    case DatasetName::SB:
      return {d, FileFormat::Dicom, false, {ClassId::LVM, ClassId::LVC}};
    case DatasetName::RV:
      return {d, FileFormat::Dicom, false, {ClassId::RV}};
    case DatasetName::LV:
      return {d, FileFormat::Dicom, false, {ClassId::LVM, ClassId::LVC}};
  }
  throw Error(ErrorCode::MissingDataset, "unknown dataset");
}

std::string to_string(const SampleKey& k) {
  return std::string(to_string(k.dataset)) + "/" + k.patient_id + "/s" + std::to_string(k.slice_index) +
         "/f" + std::to_string(k.frame_index);
}

}  // namespace cardioseg
