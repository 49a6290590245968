#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cardioseg/core/config.hpp"
#include "cardioseg/core/sample.hpp"
#include "cardioseg/core/sample_store.hpp"
#include "cardioseg/core/storage.hpp"
#include "cardioseg/ingest/dataset.hpp"
#include "cardioseg/metrics/metrics.hpp"
#include "cardioseg/model/train.hpp"
#include "cardioseg/postprocess/postprocess.hpp"
#include "cardioseg/preprocess/profile.hpp"

namespace cardioseg::pipeline {

struct ExperimentSpec {
  std::string id;
  std::vector<std::string> train_datasets;
  std::string test_dataset;
  preprocess::ProfileName profile = preprocess::ProfileName::Khened;
  std::string model = "unet2d";  // or "external:<prediction dir>"
  postprocess::PostprocessConfig postprocess;
  std::uint64_t seed = 0;
};

/// The sixteen experiments of the study: same-dataset (1a-1d), cross-dataset (2a-2c),
/// ACDC plus one other tested on ACDC (3.1a-3.1c) and on the other (3.2a-3.2c), and
/// ACDC+LV+SB tested on each of its members (4a-4c). All use the khened profile.
std::vector<ExperimentSpec> builtin_matrix();
/// Throws UnknownKey.
ExperimentSpec find_experiment(std::string_view id);

struct ExperimentOptions {
  model::NetworkConfig network;
  model::TrainConfig train;
  preprocess::ProfileOptions preprocess;
  postprocess::PostprocessConfig postprocess;
  std::map<DatasetName, ingest::DatasetLayout> layouts = ingest::default_layouts();
  double holdout_fraction = 0.2;

  /// Sections: [network], [train], [augment], [preprocess] (crop, clahe_tiles,
  /// clahe_clip, bias_sigma), [postprocess], [split] (holdout_fraction) and [layouts] (file = path to a layout INI).
  static ExperimentOptions from_config(const Config& cfg);
};

struct Artifact {
  std::string key;  // storage key relative to the run directory
  std::string crc32;
  std::size_t bytes = 0;
};

struct StageTiming {
  std::string stage;
  double seconds = 0;
};

struct RunManifest {
  ExperimentSpec spec;
  ingest::AuditReport audit;
  std::map<std::string, Artifact> artifacts;  // checkpoint, predictions, records, summary, ...
  std::vector<StageTiming> timings;
  std::size_t param_count = 0;
  std::vector<std::string> train_patients;
  std::vector<std::string> test_patients;

  std::string to_json() const;
};

/// Reads dataset roots: one "NAME = path" entry per dataset in [roots] (or [data]).
std::map<DatasetName, std::filesystem::path> read_data_roots(const Config& cfg);

/// Patients of `test` held out from training: the last ceil(fraction * n) in sorted order
/// when `test` is also trained on, otherwise all of them.
struct PatientSplit {
  std::map<DatasetName, std::vector<std::string>> train;
  std::vector<std::string> test;
};
PatientSplit split_patients(const std::map<DatasetName, std::vector<std::string>>& patients,
                            std::span<const DatasetName> train, DatasetName test, double holdout_fraction);

/// Runs ingest -> preprocess -> train -> predict -> postprocess -> evaluate -> report,
/// persisting each stage under `out` and reading the next stage's input back from it.
/// Throws MissingDataset for unknown names or absent roots; other errors carry the stage name.
RunManifest run_experiment(const ExperimentSpec& spec, const std::map<DatasetName, std::filesystem::path>& roots,
                           const ExperimentOptions& opts, Storage& out);

/// Scores predictions against ground truth over the test dataset's labeled classes.
/// Truth samples without masks are skipped; a truth sample without a prediction raises UnknownKey.
std::vector<metrics::MetricsRecord> evaluate(const std::string& experiment_id, std::span<const KeyedMask> predictions,
                                             std::span<const Sample> truth);

enum class ReportFormat { Csv, Jsonl, Markdown };

/// records.csv / records.jsonl, summary.csv (experiment x dataset x class x phase) and
/// summary.md (experiment x class x phase). Returns the written keys.
std::vector<std::string> write_report(Storage& storage, const std::string& dir,
                                      std::span<const metrics::MetricsRecord> records,
                                      std::span<const ReportFormat> formats = {});

}  // namespace cardioseg::pipeline
