#include "cardioseg/core/sample_store.hpp"

#include <json.hpp>
#include <sstream>

#include "cardioseg/core/tnsr.hpp"

using nlohmann::json;

namespace cardioseg {

namespace {

std::string join_key(const std::string& dir, const std::string& name) {
  return dir.empty() ? name : dir + "/" + name;
}

json key_json(const SampleKey& k, Phase phase, std::string_view profile, Spacing s) {
  json j;
  j["dataset"] = std::string(to_string(k.dataset));
  j["patient"] = k.patient_id;
  j["slice"] = k.slice_index;
  j["frame"] = k.frame_index;
  j["phase"] = std::string(to_string(phase));
  j["profile"] = std::string(profile);
  j["spacing"] = {s.row_mm, s.col_mm};
  return j;
}

struct Record {
  SampleKey key;
  Phase phase = Phase::Unknown;
  std::string profile;
  Spacing spacing;
  std::optional<std::string> image;
  std::optional<std::string> mask;
};

std::vector<Record> read_index(const Storage& storage, const std::string& dir) {
  const auto index_key = join_key(dir, kIndexFile);
  if (!storage.exists(index_key)) throw Error(ErrorCode::LayoutMismatch, "no " + index_key);
  std::istringstream in(storage.get_text(index_key));
  std::vector<Record> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      auto j = json::parse(line);
      Record r;
      r.key.dataset = dataset_from_string(j.at("dataset").get<std::string>());
      r.key.patient_id = j.at("patient").get<std::string>();
      r.key.slice_index = j.at("slice").get<int>();
      r.key.frame_index = j.at("frame").get<int>();
      r.phase = phase_from_string(j.value("phase", std::string("unknown")));
      r.profile = j.value("profile", std::string());
      const auto& sp = j.at("spacing");
      r.spacing = {sp.at(0).get<double>(), sp.at(1).get<double>()};
      if (j.contains("image") && !j["image"].is_null()) r.image = j["image"].get<std::string>();
      if (j.contains("mask") && !j["mask"].is_null()) r.mask = j["mask"].get<std::string>();
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw Error(ErrorCode::BadFormat, index_key + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string file_stem(const SampleKey& key) {
  std::string patient;
  for (char ch : key.patient_id) patient += (std::isalnum(static_cast<unsigned char>(ch)) || ch == '-') ? ch : '_';
  return std::string(to_string(key.dataset)) + "_" + patient + "_s" + std::to_string(key.slice_index) + "_f" +
         std::to_string(key.frame_index);
}

void write_sample_set(Storage& storage, const std::string& dir, std::span<const Sample> samples,
                      std::string_view profile) {
  std::string index;
  for (const auto& s : samples) {
    const auto stem = file_stem(s.key());
    auto j = key_json(s.key(), s.phase, profile, s.image.spacing());
    const auto img_name = stem + "_img.tnsr";
    storage.put(join_key(dir, img_name), tnsr::encode_image(s.image));
    j["image"] = img_name;
    if (s.mask) {
      const auto mask_name = stem + "_mask.tnsr";
      storage.put(join_key(dir, mask_name), tnsr::encode_mask(*s.mask));
      j["mask"] = mask_name;
    } else {
      j["mask"] = nullptr;
    }
    index += j.dump() + "\n";
  }
  storage.put_text(join_key(dir, kIndexFile), index);
}

SampleSet read_sample_set(const Storage& storage, const std::string& dir) {
  SampleSet set;
  for (auto& r : read_index(storage, dir)) {
    if (!r.image) throw Error(ErrorCode::BadFormat, "record " + to_string(r.key) + " has no image");
    Sample s;
    s.dataset = r.key.dataset;
    s.patient_id = r.key.patient_id;
    s.slice_index = r.key.slice_index;
    s.frame_index = r.key.frame_index;
    s.phase = r.phase;
    s.image = tnsr::decode_image(storage.get(join_key(dir, *r.image)), r.spacing);
    if (r.mask) {
      s.mask = tnsr::decode_mask(storage.get(join_key(dir, *r.mask)), r.spacing);
      if (!s.mask->same_shape(s.image))
        throw Error(ErrorCode::ShapeMismatch, "mask/image shape differ for " + to_string(r.key));
    }
    set.profile = r.profile;
    set.samples.push_back(std::move(s));
  }
  return set;
}

void write_mask_set(Storage& storage, const std::string& dir, std::span<const KeyedMask> masks,
                    std::string_view profile) {
  std::string index;
  for (const auto& m : masks) {
    const auto name = file_stem(m.key) + "_mask.tnsr";
    storage.put(join_key(dir, name), tnsr::encode_mask(m.mask));
    auto j = key_json(m.key, m.phase, profile, m.mask.spacing());
    j["image"] = nullptr;
    j["mask"] = name;
    index += j.dump() + "\n";
  }
  storage.put_text(join_key(dir, kIndexFile), index);
}

std::vector<KeyedMask> read_mask_set(const Storage& storage, const std::string& dir) {
  std::vector<KeyedMask> out;
  for (auto& r : read_index(storage, dir)) {
    if (!r.mask) continue;
    try {
      out.push_back({r.key, r.phase, tnsr::decode_mask(storage.get(join_key(dir, *r.mask)), r.spacing)});
    } catch (const Error& e) {
      rethrow_with_context(e, join_key(dir, *r.mask));
    }
  }
  return out;
}

}  // namespace cardioseg
