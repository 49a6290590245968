#pragma once

// A sample directory holds one TNSR file per image and per mask plus an
// `index.jsonl` sidecar with one record per sample:
//
//   {"dataset":"ACDC","patient":"patient001","slice":0,"frame":1,"phase":"ED",
//    "profile":"khened","spacing":[1.5625,1.5625],
//    "image":"ACDC_patient001_s0_f1_img.tnsr","mask":"ACDC_patient001_s0_f1_mask.tnsr"}
//
// "image" or "mask" is null when absent. Prediction directories carry masks only.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cardioseg/core/sample.hpp"
#include "cardioseg/core/storage.hpp"

namespace cardioseg {

inline constexpr const char* kIndexFile = "index.jsonl";

struct KeyedMask {
  SampleKey key;
  Phase phase = Phase::Unknown;
  LabelMask2D mask;
};

/// Writes samples under `dir`; records appear in input order.
void write_sample_set(Storage& storage, const std::string& dir, std::span<const Sample> samples,
                      std::string_view profile);

struct SampleSet {
  std::vector<Sample> samples;
  std::string profile;
};

SampleSet read_sample_set(const Storage& storage, const std::string& dir);

void write_mask_set(Storage& storage, const std::string& dir, std::span<const KeyedMask> masks,
                    std::string_view profile = "");
std::vector<KeyedMask> read_mask_set(const Storage& storage, const std::string& dir);

std::string file_stem(const SampleKey& key);

}  // namespace cardioseg
