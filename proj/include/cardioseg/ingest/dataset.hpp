#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cardioseg/core/config.hpp"
#include "cardioseg/core/sample.hpp"

namespace cardioseg::ingest {

/// How one dataset is laid out on disk. Read from an INI section named after the
/// dataset (see config/layouts.ini for the documented keys). Glob patterns use
/// fnmatch syntax against paths relative to the patient directory; '*' may cross '/'.
struct DatasetLayout {
  std::string patients = "*";          // patient directories directly under the root
  std::string images;                  // image files
  std::string image_exclude;           // images matching this are skipped
  // NIfTI datasets
  std::string labels;                  // label volume name; "{stem}" = image name minus .nii/.nii.gz
  std::string frame_from;              // regex on the image file name, group 1 = frame number
  std::string phase_info;              // per-patient key-value file with "ED: n" / "ES: n"
  // DICOM + contour datasets
  std::string contours;                // contour text files
  std::string image_key;               // regex on image file name, group 1 joins to contour_key
  std::string contour_key;             // regex on contour file name
  std::string endo_contour;            // contour name pattern -> LV endocardium
  std::string epi_contour;             // -> LV epicardium
  std::string rv_endo_contour;         // -> RV endocardium
  std::string rv_epi_contour;          // parsed, not rasterized
  int frames_per_slice = 0;            // > 0: frame = (InstanceNumber - 1) % n
  std::optional<int> ed_frame;
  std::optional<int> es_frame;
};

std::map<DatasetName, DatasetLayout> parse_layouts(const Config& cfg);
/// Layouts matching the shipped synthetic fixture and the layout documented in README.
const std::map<DatasetName, DatasetLayout>& default_layouts();
std::string default_layout_text();

struct AuditEvent {
  DatasetName dataset = DatasetName::ACDC;
  std::string stage;  // "ingest", "preprocess", ...
  std::size_t patients = 0;
  std::size_t slices = 0;
  std::size_t labeled_images = 0;
};

/// Append-only record of patient/slice counts per dataset and stage.
class AuditReport {
 public:
  void record(AuditEvent e) { events_.push_back(std::move(e)); }
  void record(DatasetName d, std::string stage, const std::vector<Sample>& samples);
  void merge(const AuditReport& other);

  const std::vector<AuditEvent>& events() const noexcept { return events_; }
  std::optional<AuditEvent> find(DatasetName d, std::string_view stage) const;
  /// True when every dataset's counts after `after` equal those after `before`.
  bool preserved(std::string_view before, std::string_view after) const;

 private:
  std::vector<AuditEvent> events_;
};

struct LoadResult {
  std::vector<Sample> samples;  // ordered by (patient dir, file path)
  AuditReport audit;
};

/// Loads every image of a dataset; samples with ground truth carry a mask.
/// LayoutMismatch when the root is missing/empty or no image matches the layout.
/// Parse errors are re-thrown with the offending file path prepended.
LoadResult load_dataset(const std::filesystem::path& root, const DatasetDescriptor& d, const DatasetLayout& layout);

}  // namespace cardioseg::ingest
