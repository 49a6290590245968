// cardioseg: command-line front end. Run `cardioseg <command> --help` for options.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <set>

#include "cardioseg/augment/augment.hpp"
#include "cardioseg/core/sample_store.hpp"
#include "cardioseg/core/tnsr.hpp"
#include "cardioseg/ingest/dataset.hpp"
#include "cardioseg/metrics/metrics.hpp"
#include "cardioseg/model/predict.hpp"
#include "cardioseg/model/train.hpp"
#include "cardioseg/pipeline/fixture.hpp"
#include "cardioseg/pipeline/pipeline.hpp"
#include "cardioseg/postprocess/postprocess.hpp"
#include "cardioseg/preprocess/profile.hpp"

namespace fs = std::filesystem;
using namespace cardioseg;

namespace {

Config load_optional(const std::string& path) { return path.empty() ? Config{} : Config::load(path); }

std::map<DatasetName, ingest::DatasetLayout> layouts_from(const std::string& path) {
  return path.empty() ? ingest::default_layouts() : ingest::parse_layouts(Config::load(path));
}

std::string audit_json(const ingest::AuditReport& audit) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& e : audit.events())
    j.push_back({{"dataset", to_string(e.dataset)},
                 {"stage", e.stage},
                 {"patients", e.patients},
                 {"slices", e.slices},
                 {"labeled_images", e.labeled_images}});
  return j.dump(2) + "\n";
}

std::pair<int, int> parse_tiles(const std::string& s) {
  const auto x = s.find('x');
  try {
    if (x == std::string::npos) {
      const int n = std::stoi(s);
      return {n, n};
    }
    return {std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw Error(ErrorCode::Usage, "--clahe-tiles expects RxC, got '" + s + "'");
  }
}

std::vector<Sample> read_samples(const std::string& dir) {
  LocalStorage s(dir);
  return read_sample_set(s, "").samples;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cardiac MRI segmentation pipeline"};
  app.require_subcommand(1);

  // ingest
  auto* ingest_cmd = app.add_subcommand("ingest", "Load a dataset into a sample directory");
  std::string dataset, root, out, layouts_file;
  ingest_cmd->add_option("--dataset", dataset, "ACDC, SB, RV or LV")->required();
  ingest_cmd->add_option("--root", root, "Dataset root directory")->required();
  ingest_cmd->add_option("--out", out, "Output sample directory")->required();
  ingest_cmd->add_option("--layouts", layouts_file, "Layout INI (default: built-in layouts)");

  // preprocess
  auto* pre_cmd = app.add_subcommand("preprocess", "Apply a preprocessing profile");
  std::string profile = "khened", in, clahe_tiles = "8x8";
  int crop = 176;
  double clahe_clip = 2.0;
  pre_cmd->add_option("--dataset", dataset, "Dataset name of the input")->required();
  pre_cmd->add_option("--profile", profile, "legacy|khened|isensee");
  pre_cmd->add_option("--in", in)->required();
  pre_cmd->add_option("--out", out)->required();
  pre_cmd->add_option("--crop", crop);
  pre_cmd->add_option("--clahe-tiles", clahe_tiles);
  pre_cmd->add_option("--clahe-clip", clahe_clip);

  // augment-preview
  auto* aug_cmd = app.add_subcommand("augment-preview", "Write augmented copies of one TNSR image");
  std::uint64_t seed = 0;
  std::string params_file;
  int count = 4;
  aug_cmd->add_option("--in", in, "Input TNSR image")->required();
  aug_cmd->add_option("--seed", seed);
  aug_cmd->add_option("--params", params_file, "INI with an [augment] section");
  aug_cmd->add_option("--count", count)->check(CLI::PositiveNumber);
  aug_cmd->add_option("--out", out, "Output directory")->required();

  // train
  auto* train_cmd = app.add_subcommand("train", "Train the 2D U-Net");
  std::vector<std::string> data_dirs;
  std::string config_file, log_file;
  train_cmd->add_option("--data", data_dirs, "Preprocessed sample directories")->required();
  train_cmd->add_option("--config", config_file, "INI with [network], [train], [augment]");
  train_cmd->add_option("--out", out, "Checkpoint path")->required();
  train_cmd->add_option("--log", log_file, "Per-step loss CSV");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "Segment a sample directory");
  std::string model_path;
  predict_cmd->add_option("--model", model_path)->required();
  predict_cmd->add_option("--in", in)->required();
  predict_cmd->add_option("--out", out)->required();

  // postprocess
  auto* post_cmd = app.add_subcommand("postprocess", "Clean predicted masks");
  double rv_threshold = 30;
  int island_max = 50;
  std::vector<std::string> disabled;
  post_cmd->add_option("--in", in)->required();
  post_cmd->add_option("--out", out)->required();
  post_cmd->add_option("--rv-threshold", rv_threshold, "mm");
  post_cmd->add_option("--island-max", island_max, "pixels");
  post_cmd->add_option("--disable", disabled, "keep_largest_lvc|filter_distant_rv|fill_islands");

  // evaluate
  auto* eval_cmd = app.add_subcommand("evaluate", "Score predictions against ground truth");
  std::string pred_dir, truth_dir, spacing_from = "meta", experiment_id = "adhoc";
  eval_cmd->add_option("--pred", pred_dir)->required();
  eval_cmd->add_option("--truth", truth_dir)->required();
  eval_cmd->add_option("--spacing-from", spacing_from)->check(CLI::IsMember({"meta"}));
  eval_cmd->add_option("--experiment", experiment_id);
  eval_cmd->add_option("--out", out, "Records CSV")->required();

  // report
  auto* report_cmd = app.add_subcommand("report", "Aggregate record CSVs");
  std::vector<std::string> record_files, group_by = {"experiment", "class", "phase"};
  std::vector<std::string> formats = {"csv", "md"};
  report_cmd->add_option("--records", record_files)->required();
  report_cmd->add_option("--group-by", group_by);
  report_cmd->add_option("--format", formats)->check(CLI::IsMember({"csv", "jsonl", "md"}));
  report_cmd->add_option("--out", out, "Output directory")->required();

  // experiment
  auto* exp_cmd = app.add_subcommand("experiment", "Run experiments end to end");
  std::string exp_id, roots_file;
  bool all = false;
  auto* id_opt = exp_cmd->add_option("--id", exp_id, "Experiment id, e.g. 1a or 3.2b");
  auto* all_opt = exp_cmd->add_flag("--all", all, "Run the whole matrix");
  id_opt->excludes(all_opt);
  exp_cmd->add_option("--data-roots", roots_file, "INI with [roots] NAME = path; relative paths resolve against its directory")->required();
  exp_cmd->add_option("--config", config_file, "INI with network/train/preprocess/postprocess settings");
  exp_cmd->add_option("--seed", seed);
  exp_cmd->add_option("--out", out, "Run directory")->required();

  // make-fixture
  auto* fix_cmd = app.add_subcommand("make-fixture", "Write the synthetic four-dataset fixture");
  pipeline::FixtureOptions fopts;
  fix_cmd->add_option("--out", out)->required();
  fix_cmd->add_option("--patients", fopts.patients)->check(CLI::PositiveNumber);
  fix_cmd->add_option("--slices", fopts.slices)->check(CLI::Range(2, 64));
  fix_cmd->add_option("--size", fopts.height)->check(CLI::Range(32, 1024));
  fix_cmd->add_option("--seed", fopts.seed);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (ingest_cmd->parsed()) {
      const auto d = dataset_from_string(dataset);
      const auto layouts = layouts_from(layouts_file);
      auto it = layouts.find(d);
      if (it == layouts.end()) throw Error(ErrorCode::LayoutMismatch, "no layout for " + dataset);
      auto loaded = ingest::load_dataset(root, descriptor_for(d), it->second);
      LocalStorage s(out);
      write_sample_set(s, "", loaded.samples, "raw");
      s.put_text("audit.json", audit_json(loaded.audit));
      std::cout << loaded.samples.size() << " samples\n";
    } else if (pre_cmd->parsed()) {
      const auto d = dataset_from_string(dataset);
      preprocess::ProfileOptions po;
      po.crop = crop;
      std::tie(po.clahe.tile_rows, po.clahe.tile_cols) = parse_tiles(clahe_tiles);
      po.clahe.clip_limit = clahe_clip;
      const auto p = preprocess::PreprocessProfile::make(preprocess::profile_from_string(profile), po);
      auto samples = read_samples(in);
      for (const auto& s : samples)
        if (s.dataset != d) throw Error(ErrorCode::Usage, "input holds " + std::string(to_string(s.dataset)) + " samples");
      const auto outp = preprocess::apply_profile(samples, p);
      LocalStorage s(out);
      write_sample_set(s, "", outp, profile);
      ingest::AuditReport audit;
      audit.record(d, "ingest", samples);
      audit.record(d, "preprocess", outp);
      s.put_text("audit.json", audit_json(audit));
      if (!audit.preserved("ingest", "preprocess"))
        throw Error(ErrorCode::AuditMismatch, "patient or slice counts changed during preprocessing");
      std::cout << outp.size() << " samples\n";
    } else if (aug_cmd->parsed()) {
      const auto params = augment::AugmentParams::from_config(load_optional(params_file), "augment");
      const Bytes bytes = read_file(in);
      const auto image = tnsr::decode_image(bytes, Spacing{1.0, 1.0});
      LocalStorage s(out);
      std::string log;
      for (int i = 0; i < count; ++i) {
        auto rng = augment::stream_for(seed, static_cast<std::uint64_t>(i));
        const auto spec = augment::sample_augmentation(rng, params);
        const auto [img, mask] = augment::apply_augmentation(image, std::nullopt, spec);
        const std::string name = "aug_" + std::to_string(i) + ".tnsr";
        s.put(name, tnsr::encode_image(img));
        log += name + " " + spec.describe() + "\n";
      }
      s.put_text("augment_log.txt", log);
      std::cout << log;
    } else if (train_cmd->parsed()) {
      const Config cfg = load_optional(config_file);
      const auto ncfg = model::NetworkConfig::from_config(cfg, "network");
      const auto tcfg = model::TrainConfig::from_config(cfg, "train");
      std::vector<Sample> pool;
      for (const auto& d : data_dirs) {
        auto part = read_samples(d);
        for (auto& smp : part)
          if (smp.mask) pool.push_back(std::move(smp));
      }
      std::string log = "step,total,ce,dice,l2\n";
      auto result = model::train(pool, ncfg, tcfg, [&](const model::StepLog& st) {
        log += std::to_string(st.step) + "," + format_real(st.terms.total()) + "," + format_real(st.terms.ce) + "," +
               format_real(st.terms.dice) + "," + format_real(st.terms.l2) + "\n";
      });
      write_file(out, model::encode_checkpoint(result.net));
      if (!log_file.empty()) write_text_file(log_file, log);
      std::cout << "params " << result.net.param_count() << ", final loss "
                << (result.log.empty() ? 0.0 : result.log.back().terms.total()) << "\n";
    } else if (predict_cmd->parsed()) {
      const auto net = model::decode_checkpoint(read_file(model_path));
      const auto samples = read_samples(in);
      LocalStorage s(out);
      write_mask_set(s, "", model::predict_all(net, samples));
      std::cout << samples.size() << " predictions\n";
    } else if (post_cmd->parsed()) {
      postprocess::PostprocessConfig pc;
      pc.rv_distance_threshold_mm = rv_threshold;
      pc.island_max_size = island_max;
      for (const auto& d : disabled) {
        if (d == "keep_largest_lvc") pc.keep_largest_lvc = false;
        else if (d == "filter_distant_rv") pc.filter_distant_rv = false;
        else if (d == "fill_islands") pc.fill_islands = false;
        else throw Error(ErrorCode::Usage, "unknown step '" + d + "'");
      }
      pc.validate();
      LocalStorage src(in);
      auto masks = read_mask_set(src, "");
      for (auto& m : masks) m.mask = postprocess::run_postprocess(m.mask, pc);
      LocalStorage dst(out);
      write_mask_set(dst, "", masks);
      std::cout << masks.size() << " masks\n";
    } else if (eval_cmd->parsed()) {
      LocalStorage ps(pred_dir);
      const auto preds = read_mask_set(ps, "");
      const auto truth = read_samples(truth_dir);
      const auto records = pipeline::evaluate(experiment_id, preds, truth);
      write_text_file(out, metrics::records_to_csv(records));
      std::cout << records.size() << " records\n";
    } else if (report_cmd->parsed()) {
      std::vector<metrics::MetricsRecord> records;
      for (const auto& f : record_files) {
        auto r = metrics::records_from_csv(read_text_file(f));
        records.insert(records.end(), r.begin(), r.end());
      }
      std::vector<metrics::GroupKey> keys;
      for (const auto& g : group_by) keys.push_back(metrics::group_key_from_string(g));
      const auto rows = metrics::aggregate(records, keys);
      LocalStorage s(out);
      const std::set<std::string> want(formats.begin(), formats.end());
      if (want.count("csv")) s.put_text("summary.csv", metrics::summary_to_csv(rows));
      if (want.count("jsonl")) s.put_text("records.jsonl", metrics::records_to_jsonl(records));
      if (want.count("md")) s.put_text("summary.md", metrics::summary_to_markdown(rows));
      std::cout << metrics::summary_to_markdown(rows);
    } else if (exp_cmd->parsed()) {
      if (exp_id.empty() && !all) throw Error(ErrorCode::Usage, "give --id or --all");
      auto roots = pipeline::read_data_roots(Config::load(roots_file));
      for (auto& [d, p] : roots)
        if (p.is_relative()) p = fs::path(roots_file).parent_path() / p;
      const auto opts = pipeline::ExperimentOptions::from_config(load_optional(config_file));
      std::vector<pipeline::ExperimentSpec> specs =
          all ? pipeline::builtin_matrix() : std::vector{pipeline::find_experiment(exp_id)};
      for (auto& spec : specs) {
        spec.seed = seed;
        spec.postprocess = opts.postprocess;
        LocalStorage s(fs::path(out) / spec.id);
        const auto m = pipeline::run_experiment(spec, roots, opts, s);
        std::cout << "experiment " << spec.id << ":";
        for (const auto& t : m.timings) std::printf(" %s %.2fs", t.stage.c_str(), t.seconds);
        std::cout << "\n" << s.get_text("report/summary.md");
      }
    } else if (fix_cmd->parsed()) {
      fopts.width = fopts.height;
      const auto roots = pipeline::write_fixture(out, fopts);
      std::string ini = "[roots]\n";
      for (const auto& [d, p] : roots) ini += std::string(to_string(d)) + " = " + p.lexically_relative(out).string() + "\n";
      write_text_file(fs::path(out) / "roots.ini", ini);
      std::cout << ini;
    }
  } catch (const Error& e) {
    std::cerr << "error [" << to_string(e.code()) << "]: " << e.what() << "\n";
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
