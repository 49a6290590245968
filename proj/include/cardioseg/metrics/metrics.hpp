#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cardioseg/core/image.hpp"
#include "cardioseg/core/sample.hpp"
#include "cardioseg/metrics/distance.hpp"

namespace cardioseg::metrics {

/// 2|A∩B| / (|A|+|B|) over pixels of `cls`. Both empty gives 1, exactly one empty gives 0.
double dice(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls);

/// max over p in P of the distance (mm) to the closest g in G. Throws EmptySet.
double directed_hausdorff(std::span<const Pixel> P, std::span<const Pixel> G, Spacing spacing);
double directed_hausdorff_sq(std::span<const Pixel> P, std::span<const Pixel> G, Spacing spacing);

/// Symmetric Hausdorff distance in mm between the `cls` pixel sets; nullopt when either set is empty.
std::optional<double> hausdorff_mm(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls, Spacing spacing);
std::optional<double> hausdorff_mm(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls);
/// Same value squared (no root taken).
std::optional<double> hausdorff_sq_mm(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls,
                                      Spacing spacing);

std::vector<Pixel> pixels_of(const LabelMask2D& m, ClassId cls);

struct MetricsRecord {
  std::string experiment_id;
  DatasetName dataset = DatasetName::ACDC;
  std::string patient_id;
  int slice_index = 0;
  int frame_index = 0;
  Phase phase = Phase::Unknown;
  ClassId cls = ClassId::LVC;
  double dice = 0;
  std::optional<double> hausdorff_mm;
};

/// Scores the three foreground classes of one slice.
std::vector<MetricsRecord> score_slice(const std::string& experiment_id, const SampleKey& key, Phase phase,
                                       const LabelMask2D& pred, const LabelMask2D& truth,
                                       std::span<const ClassId> classes);

enum class GroupKey { Experiment, Dataset, Class, Phase };

struct SummaryRow {
  std::vector<std::pair<GroupKey, std::string>> group;
  std::size_t count = 0;
  std::optional<double> dice_mean;
  std::optional<double> dice_median;
  std::size_t hausdorff_count = 0;
  std::size_t hausdorff_excluded = 0;
  std::optional<double> hausdorff_mean;
  std::optional<double> hausdorff_median;

  std::string value(GroupKey k) const;
};

/// Groups by the listed keys in a fixed order. An empty `group_by` yields exactly one row,
/// even for no records. Output is independent of record order.
std::vector<SummaryRow> aggregate(std::span<const MetricsRecord> records, std::span<const GroupKey> group_by);

std::string_view to_string(GroupKey k);
GroupKey group_key_from_string(std::string_view s);

// experiment_id,dataset,patient_id,slice_index,frame_index,phase,class,dice,hausdorff_mm
// (hausdorff_mm empty when missing)
extern const char* const kRecordCsvHeader;
std::string records_to_csv(std::span<const MetricsRecord> records);
std::vector<MetricsRecord> records_from_csv(const std::string& text);
std::string records_to_jsonl(std::span<const MetricsRecord> records);

std::string summary_to_csv(std::span<const SummaryRow> rows);
std::string summary_to_markdown(std::span<const SummaryRow> rows);

}  // namespace cardioseg::metrics
