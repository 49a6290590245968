#pragma once

#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "cardioseg/core/image.hpp"

namespace cardioseg {

enum class DatasetName { ACDC, SB, RV, LV };
enum class Phase { ED, ES, Unknown };
enum class FileFormat { Nifti, Dicom };

std::string_view to_string(DatasetName d);
std::string_view to_string(Phase p);
DatasetName dataset_from_string(std::string_view s);
Phase phase_from_string(std::string_view s);

/// Static per-dataset facts: container format, orientation and which classes carry ground truth.
struct DatasetDescriptor {
  DatasetName name = DatasetName::ACDC;
  FileFormat file_format = FileFormat::Nifti;
  bool needs_orientation_flip = false;
  std::set<ClassId> labeled_classes;
};

DatasetDescriptor descriptor_for(DatasetName d);

/// Identity of one 2-D sample within a dataset load.
struct SampleKey {
  DatasetName dataset = DatasetName::ACDC;
  std::string patient_id;
  int slice_index = 0;
  int frame_index = 0;

  auto operator<=>(const SampleKey&) const = default;
};

std::string to_string(const SampleKey& k);

struct Sample {
  ScalarImage2D image;
  std::optional<LabelMask2D> mask;
  DatasetName dataset = DatasetName::ACDC;
  std::string patient_id;
  int slice_index = 0;
  int frame_index = 0;
  Phase phase = Phase::Unknown;
  // ordering hints from DICOM headers, consumed by assemble_frames
  std::optional<double> slice_location;
  std::optional<int> instance_number;

  SampleKey key() const { return {dataset, patient_id, slice_index, frame_index}; }
  bool labeled() const { return mask.has_value(); }
};

}  // namespace cardioseg
