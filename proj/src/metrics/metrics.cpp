#include "cardioseg/metrics/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>

#include <json.hpp>

#include "cardioseg/core/bytes.hpp"

namespace cardioseg::metrics {

namespace {

void check_dims(const LabelMask2D& a, const LabelMask2D& b) {
  if (!a.same_shape(b))
    throw Error(ErrorCode::DimensionMismatch, std::to_string(a.height()) + "x" + std::to_string(a.width()) + " vs " +
                                                  std::to_string(b.height()) + "x" + std::to_string(b.width()));
}

// max over pixels of `from` (class cls) of the squared distance map to `to` sites
double directed_sq_on_grid(const LabelMask2D& from, const LabelMask2D& to, std::uint8_t cls, Spacing s) {
  std::vector<std::uint8_t> sites(to.pixels().size());
  for (std::size_t i = 0; i < sites.size(); ++i) sites[i] = to.pixels()[i] == cls;
  const auto dist = squared_distance_transform(sites, to.height(), to.width(), s);
  double worst = 0;
  for (std::size_t i = 0; i < dist.size(); ++i)
    if (from.pixels()[i] == cls) worst = std::max(worst, dist[i]);
  return worst;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line, std::size_t line_no) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(ErrorCode::MalformedLine, "unterminated quote on line " + std::to_string(line_no));
  fields.push_back(std::move(cur));
  return fields;
}

template <typename T>
T parse_number(const std::string& s, std::size_t line_no) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(ErrorCode::MalformedLine, "bad number '" + s + "' on line " + std::to_string(line_no));
  return v;
}

std::optional<double> median_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
}

// sums sorted values so the result does not depend on input order
std::optional<double> mean_of(std::vector<double> v) {
  if (v.empty()) return std::nullopt;
  std::sort(v.begin(), v.end());
  double sum = 0;
  for (double x : v) sum += x;
  return sum / static_cast<double>(v.size());
}

std::string opt_real(const std::optional<double>& v) { return v ? format_real(*v) : std::string(); }

std::string group_value(const MetricsRecord& r, GroupKey k) {
  switch (k) {
    case GroupKey::Experiment: return r.experiment_id;
    case GroupKey::Dataset: return std::string(to_string(r.dataset));
    case GroupKey::Class: return std::string(to_string(r.cls));
    case GroupKey::Phase: return std::string(to_string(r.phase));
  }
  return {};
}

}  // namespace

std::vector<Pixel> pixels_of(const LabelMask2D& m, ClassId cls) {
  std::vector<Pixel> out;
  const auto k = static_cast<std::uint8_t>(cls);
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c)
      if (m(r, c) == k) out.push_back({r, c});
  return out;
}

double dice(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls) {
  check_dims(pred, truth);
  const auto k = static_cast<std::uint8_t>(cls);
  std::size_t a = 0, b = 0, both = 0;
  const auto& p = pred.pixels();
  const auto& t = truth.pixels();
  for (std::size_t i = 0; i < p.size(); ++i) {
    const bool in_a = p[i] == k, in_b = t[i] == k;
    a += in_a;
    b += in_b;
    both += in_a && in_b;
  }
  if (a + b == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(a + b);
}

double directed_hausdorff_sq(std::span<const Pixel> P, std::span<const Pixel> G, Spacing spacing) {
  if (P.empty() || G.empty()) throw Error(ErrorCode::EmptySet, "directed Hausdorff needs two non-empty sets");
  int r0 = P[0].row, r1 = r0, c0 = P[0].col, c1 = c0;
  for (auto set : {P, G})
    for (const auto& p : set) {
      r0 = std::min(r0, p.row);
      r1 = std::max(r1, p.row);
      c0 = std::min(c0, p.col);
      c1 = std::max(c1, p.col);
    }
  const int h = r1 - r0 + 1, w = c1 - c0 + 1;
  std::vector<std::uint8_t> sites(static_cast<std::size_t>(h) * w, 0);
  for (const auto& g : G) sites[static_cast<std::size_t>(g.row - r0) * w + (g.col - c0)] = 1;
  const auto dist = squared_distance_transform(sites, h, w, spacing);
  double worst = 0;
  for (const auto& p : P) worst = std::max(worst, dist[static_cast<std::size_t>(p.row - r0) * w + (p.col - c0)]);
  return worst;
}

double directed_hausdorff(std::span<const Pixel> P, std::span<const Pixel> G, Spacing spacing) {
  return std::sqrt(directed_hausdorff_sq(P, G, spacing));
}

std::optional<double> hausdorff_sq_mm(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls,
                                      Spacing spacing) {
  check_dims(pred, truth);
  const auto k = static_cast<std::uint8_t>(cls);
  const auto has = [k](const LabelMask2D& m) { return std::find(m.pixels().begin(), m.pixels().end(), k) != m.pixels().end(); };
  if (!has(pred) || !has(truth)) return std::nullopt;
  return std::max(directed_sq_on_grid(pred, truth, k, spacing), directed_sq_on_grid(truth, pred, k, spacing));
}

std::optional<double> hausdorff_mm(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls, Spacing spacing) {
  auto sq = hausdorff_sq_mm(pred, truth, cls, spacing);
  if (!sq) return std::nullopt;
  return std::sqrt(*sq);
}

std::optional<double> hausdorff_mm(const LabelMask2D& pred, const LabelMask2D& truth, ClassId cls) {
  return hausdorff_mm(pred, truth, cls, truth.spacing());
}

std::vector<MetricsRecord> score_slice(const std::string& experiment_id, const SampleKey& key, Phase phase,
                                       const LabelMask2D& pred, const LabelMask2D& truth,
                                       std::span<const ClassId> classes) {
  std::vector<MetricsRecord> out;
  for (ClassId cls : classes) {
    MetricsRecord r;
    r.experiment_id = experiment_id;
    r.dataset = key.dataset;
    r.patient_id = key.patient_id;
    r.slice_index = key.slice_index;
    r.frame_index = key.frame_index;
    r.phase = phase;
    r.cls = cls;
    r.dice = dice(pred, truth, cls);
    r.hausdorff_mm = hausdorff_mm(pred, truth, cls, truth.spacing());
    out.push_back(std::move(r));
  }
  return out;
}

std::string SummaryRow::value(GroupKey k) const {
  for (const auto& [key, v] : group)
    if (key == k) return v;
  return {};
}

std::vector<SummaryRow> aggregate(std::span<const MetricsRecord> records, std::span<const GroupKey> group_by) {
  std::vector<GroupKey> keys(group_by.begin(), group_by.end());
  std::sort(keys.begin(), keys.end());
  keys.erase(std::unique(keys.begin(), keys.end()), keys.end());

  struct Acc {
    std::vector<double> dice;
    std::vector<double> hd;
    std::size_t missing = 0;
  };
  std::map<std::vector<std::string>, Acc> groups;
  if (keys.empty()) groups[{}];
  for (const auto& r : records) {
    std::vector<std::string> gk;
    for (auto k : keys) gk.push_back(group_value(r, k));
    auto& acc = groups[gk];
    acc.dice.push_back(r.dice);
    if (r.hausdorff_mm)
      acc.hd.push_back(*r.hausdorff_mm);
    else
      ++acc.missing;
  }

  std::vector<SummaryRow> rows;
  for (auto& [gk, acc] : groups) {
    SummaryRow row;
    for (std::size_t i = 0; i < keys.size(); ++i) row.group.emplace_back(keys[i], gk[i]);
    row.count = acc.dice.size();
    row.dice_mean = mean_of(acc.dice);
    row.dice_median = median_of(acc.dice);
    row.hausdorff_count = acc.hd.size();
    row.hausdorff_excluded = acc.missing;
    row.hausdorff_mean = mean_of(acc.hd);
    row.hausdorff_median = median_of(acc.hd);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string_view to_string(GroupKey k) {
  switch (k) {
    case GroupKey::Experiment: return "experiment";
    case GroupKey::Dataset: return "dataset";
    case GroupKey::Class: return "class";
    case GroupKey::Phase: return "phase";
  }
  return "?";
}

GroupKey group_key_from_string(std::string_view s) {
  if (s == "experiment") return GroupKey::Experiment;
  if (s == "dataset") return GroupKey::Dataset;
  if (s == "class") return GroupKey::Class;
  if (s == "phase") return GroupKey::Phase;
  throw Error(ErrorCode::UnknownKey, "unknown group key '" + std::string(s) + "'");
}

const char* const kRecordCsvHeader = "experiment_id,dataset,patient_id,slice_index,frame_index,phase,class,dice,hausdorff_mm";

std::string records_to_csv(std::span<const MetricsRecord> records) {
  std::ostringstream os;
  os << kRecordCsvHeader << '\n';
  for (const auto& r : records) {
    os << csv_field(r.experiment_id) << ',' << to_string(r.dataset) << ',' << csv_field(r.patient_id) << ','
       << r.slice_index << ',' << r.frame_index << ',' << to_string(r.phase) << ',' << to_string(r.cls) << ','
       << format_real(r.dice) << ',' << opt_real(r.hausdorff_mm) << '\n';
  }
  return os.str();
}

std::vector<MetricsRecord> records_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  std::vector<MetricsRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kRecordCsvHeader) throw Error(ErrorCode::BadFormat, "unexpected metrics CSV header");
      continue;
    }
    if (line.empty()) continue;
    const auto f = split_csv_line(line, line_no);
    if (f.size() != 9) throw Error(ErrorCode::MalformedLine, "expected 9 fields on line " + std::to_string(line_no));
    MetricsRecord r;
    r.experiment_id = f[0];
    r.dataset = dataset_from_string(f[1]);
    r.patient_id = f[2];
    r.slice_index = parse_number<int>(f[3], line_no);
    r.frame_index = parse_number<int>(f[4], line_no);
    r.phase = phase_from_string(f[5]);
    r.cls = class_from_string(f[6]);
    r.dice = parse_number<double>(f[7], line_no);
    if (!f[8].empty()) r.hausdorff_mm = parse_number<double>(f[8], line_no);
    out.push_back(std::move(r));
  }
  if (line_no == 0) throw Error(ErrorCode::BadFormat, "empty metrics CSV");
  return out;
}

std::string records_to_jsonl(std::span<const MetricsRecord> records) {
  std::string out;
  for (const auto& r : records) {
    nlohmann::json j{{"experiment_id", r.experiment_id},
                     {"dataset", to_string(r.dataset)},
                     {"patient_id", r.patient_id},
                     {"slice_index", r.slice_index},
                     {"frame_index", r.frame_index},
                     {"phase", to_string(r.phase)},
                     {"class", to_string(r.cls)},
                     {"dice", r.dice}};
    j["hausdorff_mm"] = r.hausdorff_mm ? nlohmann::json(*r.hausdorff_mm) : nlohmann::json(nullptr);
    out += j.dump();
    out += '\n';
  }
  return out;
}

std::string summary_to_csv(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  std::vector<GroupKey> keys;
  if (!rows.empty())
    for (const auto& [k, v] : rows.front().group) keys.push_back(k);
  for (auto k : keys) os << to_string(k) << ',';
  os << "count,dice_mean,dice_median,hausdorff_count,hausdorff_excluded,hausdorff_mean,hausdorff_median\n";
  for (const auto& r : rows) {
    for (const auto& [k, v] : r.group) os << csv_field(v) << ',';
    os << r.count << ',' << opt_real(r.dice_mean) << ',' << opt_real(r.dice_median) << ',' << r.hausdorff_count << ','
       << r.hausdorff_excluded << ',' << opt_real(r.hausdorff_mean) << ',' << opt_real(r.hausdorff_median) << '\n';
  }
  return os.str();
}

std::string summary_to_markdown(std::span<const SummaryRow> rows) {
  std::ostringstream os;
  std::vector<GroupKey> keys;
  if (!rows.empty())
    for (const auto& [k, v] : rows.front().group) keys.push_back(k);
  auto fixed = [](const std::optional<double>& v, int digits) {
    if (!v) return std::string("n/a");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << *v;
    return s.str();
  };
  os << '|';
  for (auto k : keys) os << ' ' << to_string(k) << " |";
  os << " n | Dice mean | Dice median | HD mean (mm) | HD median (mm) | HD missing |\n|";
  for (std::size_t i = 0; i < keys.size() + 6; ++i) os << "---|";
  os << '\n';
  for (const auto& r : rows) {
    os << '|';
    for (const auto& [k, v] : r.group) os << ' ' << v << " |";
    os << ' ' << r.count << " | " << fixed(r.dice_mean, 3) << " | " << fixed(r.dice_median, 3) << " | "
       << fixed(r.hausdorff_mean, 2) << " | " << fixed(r.hausdorff_median, 2) << " | " << r.hausdorff_excluded
       << " |\n";
  }
  return os.str();
}

}  // namespace cardioseg::metrics
