#include "cardioseg/pipeline/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <set>

#include <json.hpp>

#include "cardioseg/core/sample_store.hpp"
#include "cardioseg/model/predict.hpp"

namespace cardioseg::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

ExperimentSpec spec(std::string id, std::vector<std::string> train, std::string test) {
  ExperimentSpec s;
  s.id = std::move(id);
  s.train_datasets = std::move(train);
  s.test_dataset = std::move(test);
  return s;
}

DatasetName resolve(const std::string& name) {
  for (DatasetName d : {DatasetName::ACDC, DatasetName::SB, DatasetName::RV, DatasetName::LV})
    if (to_string(d) == name) return d;
  throw Error(ErrorCode::MissingDataset, "unknown dataset '" + name + "'");
}

template <class F>
auto timed(RunManifest& m, const std::string& stage, F&& f) -> decltype(f()) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    m.timings.push_back({stage, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    if constexpr (std::is_void_v<decltype(f())>) {
      f();
      finish();
    } else {
      auto r = f();
      finish();
      return r;
    }
  } catch (const Error& e) {
    rethrow_with_context(e, "stage " + stage);
  }
}

Artifact artifact(const Storage& s, const std::string& key) {
  const Bytes b = s.get(key);
  return {key, crc32_hex(b), b.size()};
}

// Combined checksum over every file below a directory key.
Artifact dir_artifact(const Storage& s, const std::string& dir) {
  Bytes all;
  for (const auto& k : s.list(dir)) {
    append(all, std::string_view(k));
    const Bytes b = s.get(k);
    all.insert(all.end(), b.begin(), b.end());
  }
  return {dir, crc32_hex(all), all.size()};
}

std::string join(const std::string& dir, const std::string& name) { return dir.empty() ? name : dir + "/" + name; }

void check_audit(const ingest::AuditReport& audit, DatasetName d, std::string_view before, std::string_view after) {
  const auto a = audit.find(d, before), b = audit.find(d, after);
  if (!a || !b) return;
  if (a->patients != b->patients || a->slices != b->slices || a->labeled_images != b->labeled_images)
    throw Error(ErrorCode::AuditMismatch, std::string(to_string(d)) + ": counts after " + std::string(after) +
                                              " differ from " + std::string(before));
}

json spec_json(const ExperimentSpec& s) {
  return {{"id", s.id},
          {"train_datasets", s.train_datasets},
          {"test_dataset", s.test_dataset},
          {"profile", to_string(s.profile)},
          {"model", s.model},
          {"postprocess", s.postprocess.describe()},
          {"seed", s.seed}};
}

}  // namespace

std::vector<ExperimentSpec> builtin_matrix() {
  return {
      spec("1a", {"ACDC"}, "ACDC"),
      spec("1b", {"LV"}, "LV"),
      spec("1c", {"RV"}, "RV"),
      spec("1d", {"SB"}, "SB"),
      spec("2a", {"ACDC"}, "LV"),
      spec("2b", {"ACDC"}, "RV"),
      spec("2c", {"ACDC"}, "SB"),
      spec("3.1a", {"ACDC", "LV"}, "ACDC"),
      spec("3.1b", {"ACDC", "RV"}, "ACDC"),
      spec("3.1c", {"ACDC", "SB"}, "ACDC"),
      spec("3.2a", {"ACDC", "LV"}, "LV"),
      spec("3.2b", {"ACDC", "RV"}, "RV"),
      spec("3.2c", {"ACDC", "SB"}, "SB"),
      spec("4a", {"ACDC", "LV", "SB"}, "ACDC"),
      spec("4b", {"ACDC", "LV", "SB"}, "LV"),
      spec("4c", {"ACDC", "LV", "SB"}, "SB"),
  };
}

ExperimentSpec find_experiment(std::string_view id) {
  for (auto& s : builtin_matrix())
    if (s.id == id) return s;
  throw Error(ErrorCode::UnknownKey, "no experiment '" + std::string(id) + "'");
}

ExperimentOptions ExperimentOptions::from_config(const Config& cfg) {
  ExperimentOptions o;
  o.network = model::NetworkConfig::from_config(cfg, "network");
  o.train = model::TrainConfig::from_config(cfg, "train");
  o.preprocess.crop = static_cast<int>(cfg.get_int("preprocess.crop", o.preprocess.crop));
  o.preprocess.clahe.tile_rows = static_cast<int>(cfg.get_int("preprocess.clahe_tiles", o.preprocess.clahe.tile_rows));
  o.preprocess.clahe.tile_cols = o.preprocess.clahe.tile_rows;
  o.preprocess.clahe.clip_limit = cfg.get_real("preprocess.clahe_clip", o.preprocess.clahe.clip_limit);
  o.preprocess.bias_sigma = cfg.get_real("preprocess.bias_sigma", o.preprocess.bias_sigma);
  o.postprocess = postprocess::PostprocessConfig::from_config(cfg, "postprocess");
  if (auto file = cfg.find("layouts.file")) o.layouts = ingest::parse_layouts(Config::load(*file));
  o.holdout_fraction = cfg.get_real("split.holdout_fraction", o.holdout_fraction);
  if (!(o.holdout_fraction > 0 && o.holdout_fraction < 1))
    throw Error(ErrorCode::InvalidConfig, "split.holdout_fraction must lie in (0, 1)");
  if (o.preprocess.crop < 1) throw Error(ErrorCode::InvalidConfig, "preprocess.crop must be positive");
  return o;
}

std::map<DatasetName, fs::path> read_data_roots(const Config& cfg) {
  std::map<DatasetName, fs::path> roots;
  for (const char* section : {"roots", "data"}) {
    for (const auto& key : cfg.keys(section)) {
      const auto d = resolve(key);
      roots[d] = cfg.get(std::string(section) + "." + key);
    }
  }
  return roots;
}

PatientSplit split_patients(const std::map<DatasetName, std::vector<std::string>>& patients,
                            std::span<const DatasetName> train, DatasetName test, double holdout_fraction) {
  PatientSplit split;
  const bool overlap = std::find(train.begin(), train.end(), test) != train.end();
  for (DatasetName d : train) {
    auto it = patients.find(d);
    std::vector<std::string> ids = it == patients.end() ? std::vector<std::string>{} : it->second;
    std::sort(ids.begin(), ids.end());
    if (d == test) {
      const auto held = static_cast<std::size_t>(std::ceil(holdout_fraction * static_cast<double>(ids.size())));
      const std::size_t keep = ids.size() > held ? ids.size() - held : 0;
      split.test.assign(ids.begin() + keep, ids.end());
      ids.resize(keep);
    }
    split.train[d] = std::move(ids);
  }
  if (!overlap) {
    auto it = patients.find(test);
    if (it != patients.end()) split.test = it->second;
    std::sort(split.test.begin(), split.test.end());
  }
  return split;
}

std::vector<metrics::MetricsRecord> evaluate(const std::string& experiment_id, std::span<const KeyedMask> predictions,
                                             std::span<const Sample> truth) {
  std::map<SampleKey, const KeyedMask*> by_key;
  for (const auto& p : predictions) by_key[p.key] = &p;
  std::vector<const Sample*> ordered;
  for (const auto& s : truth)
    if (s.mask) ordered.push_back(&s);
  std::sort(ordered.begin(), ordered.end(), [](const Sample* a, const Sample* b) { return a->key() < b->key(); });

  std::vector<metrics::MetricsRecord> records;
  for (const Sample* s : ordered) {
    auto it = by_key.find(s->key());
    if (it == by_key.end()) throw Error(ErrorCode::UnknownKey, "no prediction for " + to_string(s->key()));
    const auto& labeled = descriptor_for(s->dataset).labeled_classes;
    const std::vector<ClassId> classes(labeled.begin(), labeled.end());
    auto r = metrics::score_slice(experiment_id, s->key(), s->phase, it->second->mask, *s->mask, classes);
    records.insert(records.end(), r.begin(), r.end());
  }
  return records;
}

std::vector<std::string> write_report(Storage& storage, const std::string& dir,
                                      std::span<const metrics::MetricsRecord> records,
                                      std::span<const ReportFormat> formats) {
  static constexpr ReportFormat kAll[] = {ReportFormat::Csv, ReportFormat::Jsonl, ReportFormat::Markdown};
  if (formats.empty()) formats = kAll;
  auto wants = [&](ReportFormat f) { return std::find(formats.begin(), formats.end(), f) != formats.end(); };
  std::vector<std::string> keys;
  auto put = [&](const std::string& name, const std::string& text) {
    const auto key = join(dir, name);
    try {
      storage.put_text(key, text);
    } catch (const Error& e) {
      rethrow_with_context(e, key);
    } catch (const std::exception& e) {
      throw Error(ErrorCode::IoError, key + ": " + e.what());
    }
    keys.push_back(key);
  };
  if (wants(ReportFormat::Csv)) {
    put("records.csv", metrics::records_to_csv(records));
    static constexpr metrics::GroupKey kFull[] = {metrics::GroupKey::Experiment, metrics::GroupKey::Dataset,
                                                  metrics::GroupKey::Class, metrics::GroupKey::Phase};
    const auto rows = metrics::aggregate(records, kFull);
    put("summary.csv", metrics::summary_to_csv(rows));
  }
  if (wants(ReportFormat::Jsonl)) put("records.jsonl", metrics::records_to_jsonl(records));
  if (wants(ReportFormat::Markdown)) {
    static constexpr metrics::GroupKey kTable[] = {metrics::GroupKey::Experiment, metrics::GroupKey::Class,
                                                   metrics::GroupKey::Phase};
    put("summary.md", metrics::summary_to_markdown(metrics::aggregate(records, kTable)));
  }
  return keys;
}

std::string RunManifest::to_json() const {
  json j;
  j["spec"] = spec_json(spec);
  j["param_count"] = param_count;
  j["train_patients"] = train_patients;
  j["test_patients"] = test_patients;
  json audit_j = json::array();
  for (const auto& e : audit.events())
    audit_j.push_back({{"dataset", to_string(e.dataset)},
                       {"stage", e.stage},
                       {"patients", e.patients},
                       {"slices", e.slices},
                       {"labeled_images", e.labeled_images}});
  j["audit"] = audit_j;
  json arts = json::object();
  for (const auto& [name, a] : artifacts) arts[name] = {{"path", a.key}, {"crc32", a.crc32}, {"bytes", a.bytes}};
  j["artifacts"] = arts;
  json t = json::array();
  for (const auto& s : timings) t.push_back({{"stage", s.stage}, {"seconds", s.seconds}});
  j["timings"] = t;
  return j.dump(2) + "\n";
}

RunManifest run_experiment(const ExperimentSpec& spec, const std::map<DatasetName, fs::path>& roots,
                           const ExperimentOptions& opts, Storage& out) {
  RunManifest m;
  m.spec = spec;

  std::vector<DatasetName> train_sets;
  for (const auto& n : spec.train_datasets) train_sets.push_back(resolve(n));
  const DatasetName test_set = resolve(spec.test_dataset);
  const bool external = spec.model.rfind("external:", 0) == 0;
  if (!external && spec.model != "unet2d") throw Error(ErrorCode::InvalidConfig, "unknown model '" + spec.model + "'");

  std::vector<DatasetName> needed = train_sets;
  if (std::find(needed.begin(), needed.end(), test_set) == needed.end()) needed.push_back(test_set);
  if (external) needed = {test_set};
  for (DatasetName d : needed) {
    auto it = roots.find(d);
    if (it == roots.end()) throw Error(ErrorCode::MissingDataset, "no root given for " + std::string(to_string(d)));
    if (!fs::is_directory(it->second))
      throw Error(ErrorCode::MissingDataset, std::string(to_string(d)) + " root " + it->second.string() + " not found");
  }

  // ingest
  timed(m, "ingest", [&] {
    for (DatasetName d : needed) {
      auto layout = opts.layouts.find(d);
      if (layout == opts.layouts.end())
        throw Error(ErrorCode::LayoutMismatch, "no layout for " + std::string(to_string(d)));
      auto loaded = ingest::load_dataset(roots.at(d), descriptor_for(d), layout->second);
      write_sample_set(out, "ingest/" + std::string(to_string(d)), loaded.samples, "raw");
      m.audit.merge(loaded.audit);
    }
  });

  // preprocess
  const auto profile = preprocess::PreprocessProfile::make(spec.profile, opts.preprocess);
  timed(m, "preprocess", [&] {
    for (DatasetName d : needed) {
      const auto raw = read_sample_set(out, "ingest/" + std::string(to_string(d)));
      const auto pre = preprocess::apply_profile(raw.samples, profile);
      write_sample_set(out, "preprocessed/" + std::string(to_string(d)), pre, to_string(spec.profile));
      m.audit.record(d, "preprocess", pre);
      check_audit(m.audit, d, "ingest", "preprocess");
    }
  });

  // split
  std::map<DatasetName, std::vector<Sample>> pre;
  for (DatasetName d : needed) pre[d] = read_sample_set(out, "preprocessed/" + std::string(to_string(d))).samples;
  std::map<DatasetName, std::vector<std::string>> patients;
  for (const auto& [d, samples] : pre) {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.patient_id);
    patients[d].assign(ids.begin(), ids.end());
  }
  const auto split = split_patients(patients, external ? std::span<const DatasetName>{} : train_sets, test_set,
                                    opts.holdout_fraction);
  m.test_patients = split.test;
  const std::set<std::string> test_ids(split.test.begin(), split.test.end());
  std::vector<Sample> test_samples;
  for (const auto& s : pre[test_set])
    if (test_ids.count(s.patient_id)) test_samples.push_back(s);

  // train
  const std::string ckpt_key = "model/model.ckpt";
  if (!external) {
    timed(m, "train", [&] {
      std::vector<Sample> pool;
      for (const auto& [d, ids] : split.train) {
        const std::set<std::string> keep(ids.begin(), ids.end());
        for (const auto& id : ids) m.train_patients.push_back(std::string(to_string(d)) + "/" + id);
        for (const auto& s : pre[d])
          if (keep.count(s.patient_id) && s.mask) pool.push_back(s);
      }
      model::NetworkConfig ncfg = opts.network;
      ncfg.input_size = opts.preprocess.crop;
      model::TrainConfig tcfg = opts.train;
      tcfg.seed = spec.seed;
      std::string log = "step,total,ce,dice,l2\n";
      auto result = model::train(pool, ncfg, tcfg, [&](const model::StepLog& s) {
        log += std::to_string(s.step) + "," + format_real(s.terms.total()) + "," + format_real(s.terms.ce) + "," +
               format_real(s.terms.dice) + "," + format_real(s.terms.l2) + "\n";
      });
      m.param_count = result.net.param_count();
      out.put(ckpt_key, model::encode_checkpoint(result.net));
      out.put_text("model/train_log.csv", log);
    });
  }

  // predict
  timed(m, "predict", [&] {
    std::vector<KeyedMask> preds;
    if (external) {
      LocalStorage src(spec.model.substr(std::string("external:").size()));
      std::set<SampleKey> known;
      for (const auto& s : test_samples) known.insert(s.key());
      preds = model::load_external_predictions(src, "", &known);
    } else {
      const auto net = model::decode_checkpoint(out.get(ckpt_key));
      preds = model::predict_all(net, test_samples);
    }
    write_mask_set(out, "predictions/raw", preds, to_string(spec.profile));
  });

  // postprocess
  timed(m, "postprocess", [&] {
    auto preds = read_mask_set(out, "predictions/raw");
    for (auto& p : preds) p.mask = postprocess::run_postprocess(p.mask, spec.postprocess);
    write_mask_set(out, "predictions/post", preds, to_string(spec.profile));
  });

  // evaluate + report
  std::vector<std::string> report_keys;
  timed(m, "evaluate", [&] {
    const auto preds = read_mask_set(out, "predictions/post");
    const auto truth = read_sample_set(out, "preprocessed/" + std::string(to_string(test_set)));
    std::vector<Sample> held;
    for (const auto& s : truth.samples)
      if (test_ids.count(s.patient_id)) held.push_back(s);
    const auto records = evaluate(spec.id, preds, held);
    report_keys = write_report(out, "report", records);
  });

  if (!external) m.artifacts["checkpoint"] = artifact(out, ckpt_key);
  m.artifacts["predictions"] = dir_artifact(out, "predictions/raw");
  m.artifacts["postprocessed"] = dir_artifact(out, "predictions/post");
  for (const auto& k : report_keys) m.artifacts[k.substr(k.rfind('/') + 1)] = artifact(out, k);
  for (const auto& [name, a] : m.artifacts)
    if (out.list(a.key).empty()) throw Error(ErrorCode::IoError, "artifact " + a.key + " missing after run");
  out.put_text("manifest.json", m.to_json());
  return m;
}

}  // namespace cardioseg::pipeline
