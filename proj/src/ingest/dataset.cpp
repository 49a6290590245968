#include "cardioseg/ingest/dataset.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <map>
#include <regex>
#include <set>
#include <sstream>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/ingest/contour.hpp"
#include "cardioseg/ingest/dicom.hpp"
#include "cardioseg/ingest/frames.hpp"
#include "cardioseg/ingest/nifti.hpp"
#include "default_layouts.inc"

namespace fs = std::filesystem;

namespace cardioseg::ingest {

namespace {

bool glob_match(const std::string& pattern, const std::string& text) {
  return !pattern.empty() && ::fnmatch(pattern.c_str(), text.c_str(), 0) == 0;
}

std::vector<fs::path> find_files(const fs::path& dir, const std::string& pattern, const std::string& exclude) {
  std::vector<fs::path> out;
  if (pattern.empty()) return out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto rel = fs::relative(e.path(), dir).generic_string();
    if (glob_match(pattern, rel) && !glob_match(exclude, rel)) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string nifti_stem(const std::string& name) {
  for (const char* ext : {".nii.gz", ".nii"}) {
    const std::string e = ext;
    if (name.size() > e.size() && name.compare(name.size() - e.size(), e.size(), e) == 0)
      return name.substr(0, name.size() - e.size());
  }
  return name;
}

std::optional<std::string> regex_group(const std::string& pattern, const std::string& text) {
  if (pattern.empty()) return std::nullopt;
  std::smatch m;
  if (std::regex_search(text, m, std::regex(pattern)) && m.size() > 1) return m[1].str();
  return std::nullopt;
}

/// Canonical join key: numeric keys compare by value ("0048" == "48").
std::string normalize_key(const std::string& k) {
  if (!k.empty() && std::all_of(k.begin(), k.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return std::to_string(std::stoll(k));
  return k;
}

std::map<std::string, int> read_phase_info(const fs::path& file) {
  std::map<std::string, int> out;
  if (!fs::exists(file)) return out;
  std::istringstream in(read_text_file(file));
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    auto key = line.substr(0, colon);
    auto val = line.substr(colon + 1);
    key.erase(std::remove_if(key.begin(), key.end(), ::isspace), key.end());
    try {
      out[key] = std::stoi(val);
    } catch (const std::exception&) {
      // non-numeric entries (Group, Height, ...) are irrelevant here
    }
  }
  return out;
}

template <class F>
auto with_path_context(const fs::path& p, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const Error& e) {
    rethrow_with_context(e, p.string());
  }
}

std::vector<Sample> load_nifti_patient(const fs::path& pdir, const std::string& patient, const DatasetDescriptor& d,
                                       const DatasetLayout& layout) {
  std::vector<Sample> out;
  const auto phases = layout.phase_info.empty() ? std::map<std::string, int>{}
                                                : read_phase_info(pdir / layout.phase_info);
  for (const auto& file : find_files(pdir, layout.images, layout.image_exclude)) {
    const auto name = file.filename().string();
    int frame_override = -1;
    if (auto f = regex_group(layout.frame_from, name)) frame_override = std::stoi(*f);

    auto slices = with_path_context(file, [&] { return parse_nifti(read_file(file)); });
    std::vector<NiftiMaskSlice> masks;
    if (!layout.labels.empty()) {
      std::string label_name = layout.labels;
      const auto pos = label_name.find("{stem}");
      if (pos != std::string::npos) label_name.replace(pos, 6, nifti_stem(name));
      auto label_path = file.parent_path() / label_name;
      if (!fs::exists(label_path) && label_path.extension() == ".gz") label_path.replace_extension();
      if (fs::exists(label_path))
        masks = with_path_context(label_path, [&] { return parse_nifti_mask(read_file(label_path)); });
    }
    if (!masks.empty() && masks.size() != slices.size())
      throw Error(ErrorCode::LayoutMismatch, file.string() + ": label volume slice count differs from image");

    for (std::size_t i = 0; i < slices.size(); ++i) {
      Sample s;
      s.dataset = d.name;
      s.patient_id = patient;
      s.slice_index = slices[i].slice_index;
      s.frame_index = frame_override >= 0 ? frame_override : slices[i].frame_index;
      if (auto it = phases.find("ED"); it != phases.end() && it->second == s.frame_index) s.phase = Phase::ED;
      if (auto it = phases.find("ES"); it != phases.end() && it->second == s.frame_index) s.phase = Phase::ES;
      s.image = std::move(slices[i].image);
      if (!masks.empty()) {
        if (!masks[i].mask.same_shape(s.image))
          throw Error(ErrorCode::LayoutMismatch, file.string() + ": label slice shape differs from image");
        auto m = std::move(masks[i].mask);
        m.set_spacing(s.image.spacing());
        s.mask = std::move(m);
      }
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<Sample> load_dicom_patient(const fs::path& pdir, const std::string& patient, const DatasetDescriptor& d,
                                       const DatasetLayout& layout) {
  struct ContourSet {
    std::optional<Polygon> endo, epi, rv_endo, rv_epi;
  };
  std::map<std::string, ContourSet> contours;
  for (const auto& file : find_files(pdir, layout.contours, "")) {
    const auto name = file.filename().string();
    auto key = regex_group(layout.contour_key, name);
    if (!key) continue;
    auto poly = with_path_context(file, [&] { return parse_contour_file(read_text_file(file)); });
    auto& set = contours[normalize_key(*key)];
    if (glob_match(layout.endo_contour, name)) set.endo = poly;
    else if (glob_match(layout.epi_contour, name)) set.epi = poly;
    else if (glob_match(layout.rv_endo_contour, name)) set.rv_endo = poly;
    else if (glob_match(layout.rv_epi_contour, name)) set.rv_epi = poly;
  }

  std::vector<Sample> out;
  for (const auto& file : find_files(pdir, layout.images, layout.image_exclude)) {
    auto dcm = with_path_context(file, [&] { return parse_dicom(read_file(file)); });
    Sample s;
    s.dataset = d.name;
    s.patient_id = patient;
    s.slice_location = dcm.slice_location();
    s.instance_number = dcm.instance_number();
    if (layout.frames_per_slice > 0 && s.instance_number) {
      s.frame_index = (*s.instance_number - 1) % layout.frames_per_slice;
      if (s.frame_index < 0) s.frame_index += layout.frames_per_slice;
      if (!s.slice_location) s.slice_index = (*s.instance_number - 1) / layout.frames_per_slice;
    }
    if (layout.ed_frame && *layout.ed_frame == s.frame_index) s.phase = Phase::ED;
    if (layout.es_frame && *layout.es_frame == s.frame_index) s.phase = Phase::ES;
    s.image = std::move(dcm.image);

    if (auto key = regex_group(layout.image_key, file.filename().string())) {
      auto it = contours.find(normalize_key(*key));
      if (it != contours.end()) {
        const auto& c = it->second;
        const int h = s.image.height(), w = s.image.width();
        if (d.labeled_classes.count(ClassId::RV)) {
          if (c.rv_endo) s.mask = rasterize_polygon(*c.rv_endo, h, w, ClassId::RV, s.image.spacing());
        } else if (c.endo || c.epi) {
          s.mask = compose_lv_mask(c.endo ? &*c.endo : nullptr, c.epi ? &*c.epi : nullptr, h, w, s.image.spacing());
        }
      }
    }
    out.push_back(std::move(s));
  }
  return with_path_context(pdir, [&] { return assemble_frames(std::move(out)); });
}

}  // namespace

std::map<DatasetName, DatasetLayout> parse_layouts(const Config& cfg) {
  std::map<DatasetName, DatasetLayout> out;
  for (const auto& section : cfg.sections()) {
    const DatasetName name = dataset_from_string(section);
    auto key = [&](const char* k) { return section + "." + k; };
    DatasetLayout l;
    l.patients = cfg.get(key("patients"), "*");
    l.images = cfg.get(key("images"));
    l.image_exclude = cfg.get(key("image_exclude"), "");
    l.labels = cfg.get(key("labels"), "");
    l.frame_from = cfg.get(key("frame_from"), "");
    l.phase_info = cfg.get(key("phase_info"), "");
    l.contours = cfg.get(key("contours"), "");
    l.image_key = cfg.get(key("image_key"), "");
    l.contour_key = cfg.get(key("contour_key"), "");
    l.endo_contour = cfg.get(key("endo_contour"), "");
    l.epi_contour = cfg.get(key("epi_contour"), "");
    l.rv_endo_contour = cfg.get(key("rv_endo_contour"), "");
    l.rv_epi_contour = cfg.get(key("rv_epi_contour"), "");
    l.frames_per_slice = static_cast<int>(cfg.get_int(key("frames_per_slice"), 0));
    if (cfg.has(key("ed_frame"))) l.ed_frame = static_cast<int>(cfg.get_int(key("ed_frame"), 0));
    if (cfg.has(key("es_frame"))) l.es_frame = static_cast<int>(cfg.get_int(key("es_frame"), 0));
    for (const auto& re : {l.frame_from, l.image_key, l.contour_key}) {
      try {
        if (!re.empty()) std::regex check(re);
      } catch (const std::regex_error& e) {
        throw Error(ErrorCode::InvalidConfig, "[" + section + "] bad regex '" + re + "': " + e.what());
      }
    }
    out[name] = std::move(l);
  }
  return out;
}

std::string default_layout_text() { return kDefaultLayoutText; }

const std::map<DatasetName, DatasetLayout>& default_layouts() {
  static const auto layouts = parse_layouts(Config::parse(kDefaultLayoutText));
  return layouts;
}

void AuditReport::record(DatasetName d, std::string stage, const std::vector<Sample>& samples) {
  std::set<std::string> patients;
  std::size_t labeled = 0;
  for (const auto& s : samples) {
    if (s.dataset != d) continue;
    patients.insert(s.patient_id);
    labeled += s.labeled();
  }
  const auto slices = static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [&](const Sample& s) { return s.dataset == d; }));
  record({d, std::move(stage), patients.size(), slices, labeled});
}

void AuditReport::merge(const AuditReport& other) {
  events_.insert(events_.end(), other.events_.begin(), other.events_.end());
}

std::optional<AuditEvent> AuditReport::find(DatasetName d, std::string_view stage) const {
  for (auto it = events_.rbegin(); it != events_.rend(); ++it)
    if (it->dataset == d && it->stage == stage) return *it;
  return std::nullopt;
}

bool AuditReport::preserved(std::string_view before, std::string_view after) const {
  bool any = false;
  for (const auto& e : events_) {
    if (e.stage != after) continue;
    auto b = find(e.dataset, before);
    if (!b || b->patients != e.patients || b->slices != e.slices) return false;
    any = true;
  }
  return any;
}

LoadResult load_dataset(const fs::path& root, const DatasetDescriptor& d, const DatasetLayout& layout) {
  if (!fs::is_directory(root))
    throw Error(ErrorCode::LayoutMismatch, root.string() + " is not a directory");
  std::vector<fs::path> patient_dirs;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory() && glob_match(layout.patients, e.path().filename().string())) patient_dirs.push_back(e.path());
  std::sort(patient_dirs.begin(), patient_dirs.end());
  if (patient_dirs.empty())
    throw Error(ErrorCode::LayoutMismatch, root.string() + ": no patient directories match '" + layout.patients + "'");

  LoadResult result;
  for (const auto& pdir : patient_dirs) {
    const auto patient = pdir.filename().string();
    auto samples = d.file_format == FileFormat::Nifti ? load_nifti_patient(pdir, patient, d, layout)
                                                      : load_dicom_patient(pdir, patient, d, layout);
    for (auto& s : samples) result.samples.push_back(std::move(s));
  }
  if (result.samples.empty())
    throw Error(ErrorCode::LayoutMismatch, root.string() + ": no images match '" + layout.images + "'");

  std::set<SampleKey> seen;
  for (const auto& s : result.samples)
    if (!seen.insert(s.key()).second)
      throw Error(ErrorCode::LayoutMismatch, "duplicate sample key " + to_string(s.key()));

  result.audit.record(d.name, "ingest", result.samples);
  return result;
}

}  // namespace cardioseg::ingest
