#include "cardioseg/ingest/dicom.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace cardioseg::ingest {

namespace {

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFF;
constexpr DicomTag kItem{0xFFFE, 0xE000};
constexpr DicomTag kItemDelimiter{0xFFFE, 0xE00D};
constexpr DicomTag kSequenceDelimiter{0xFFFE, 0xE0DD};

bool long_form_vr(std::string_view vr) {
  static constexpr std::string_view kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                               "UC", "UR", "UT", "UN", "SV", "UV"};
  return std::find(std::begin(kLong), std::end(kLong), vr) != std::end(kLong);
}

bool string_vr(std::string_view vr) {
  static constexpr std::string_view kStrings[] = {"AE", "AS", "CS", "DA", "DS", "DT", "IS", "LO", "LT",
                                                  "PN", "SH", "ST", "TM", "UC", "UI", "UR", "UT"};
  return std::find(std::begin(kStrings), std::end(kStrings), vr) != std::end(kStrings);
}

bool plausible_vr(const std::uint8_t* p) { return p[0] >= 'A' && p[0] <= 'Z' && p[1] >= 'A' && p[1] <= 'Z'; }

DicomTag read_tag(ByteView b, std::size_t off) {
  return {load<std::uint16_t>(b, off), load<std::uint16_t>(b, off + 2)};
}

struct ElementHeader {
  DicomTag tag;
  std::string vr;
  std::uint32_t length = 0;
  std::size_t header_size = 0;
};

ElementHeader read_element_header(ByteView b, std::size_t off) {
  if (off + 8 > b.size()) throw Error(ErrorCode::TruncatedData, "element header past end of file");
  ElementHeader h;
  h.tag = read_tag(b, off);
  if (!plausible_vr(b.data() + off + 4))
    throw Error(ErrorCode::UnsupportedTransferSyntax,
                "element " + to_string(h.tag) + " has no explicit VR (implicit-VR encoding is not supported)");
  h.vr.assign(reinterpret_cast<const char*>(b.data() + off + 4), 2);
  if (long_form_vr(h.vr)) {
    h.length = load<std::uint32_t>(b, off + 8);
    h.header_size = 12;
  } else {
    h.length = load<std::uint16_t>(b, off + 6);
    h.header_size = 8;
  }
  return h;
}

std::size_t skip_undefined_sequence(ByteView b, std::size_t off);

std::size_t skip_undefined_item(ByteView b, std::size_t off) {
  while (off + 8 <= b.size()) {
    if (read_tag(b, off) == kItemDelimiter) return off + 8;
    const auto h = read_element_header(b, off);
    off += h.header_size;
    off = (h.length == kUndefinedLength) ? skip_undefined_sequence(b, off) : off + h.length;
  }
  throw Error(ErrorCode::TruncatedData, "unterminated sequence item");
}

std::size_t skip_undefined_sequence(ByteView b, std::size_t off) {
  while (off + 8 <= b.size()) {
    const auto tag = read_tag(b, off);
    const auto len = load<std::uint32_t>(b, off + 4);
    if (tag == kSequenceDelimiter) return off + 8;
    if (tag != kItem) throw Error(ErrorCode::BadFormat, "expected sequence item, found " + to_string(tag));
    off += 8;
    off = (len == kUndefinedLength) ? skip_undefined_item(b, off) : off + len;
  }
  throw Error(ErrorCode::TruncatedData, "unterminated sequence");
}

std::string trim_value(std::string s) {
  while (!s.empty() && (s.back() == ' ' || s.back() == '\0')) s.pop_back();
  std::size_t start = 0;
  while (start < s.size() && s[start] == ' ') ++start;
  return s.substr(start);
}

template <class T>
std::string numeric_values(ByteView v) {
  std::string out;
  for (std::size_t off = 0; off + sizeof(T) <= v.size(); off += sizeof(T)) {
    if (!out.empty()) out += '\\';
    const T x = load<T>(v, off);
    if constexpr (std::is_floating_point_v<T>)
      out += format_real(static_cast<double>(x));
    else
      out += std::to_string(x);
  }
  return out;
}

std::optional<std::string> render_value(std::string_view vr, ByteView v) {
  if (string_vr(vr)) return trim_value(std::string(v.begin(), v.end()));
  if (vr == "US") return numeric_values<std::uint16_t>(v);
  if (vr == "SS") return numeric_values<std::int16_t>(v);
  if (vr == "UL") return numeric_values<std::uint32_t>(v);
  if (vr == "SL") return numeric_values<std::int32_t>(v);
  if (vr == "FL") return numeric_values<float>(v);
  if (vr == "FD") return numeric_values<double>(v);
  return std::nullopt;
}

const std::string& require(const DicomMetadata& m, DicomTag t) {
  auto it = m.find(t);
  if (it == m.end() || it->second.empty()) throw Error(ErrorCode::MissingRequiredTag, to_string(t));
  return it->second;
}

double parse_decimal(const std::string& s, DicomTag t) {
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite");
    return v;
  } catch (const std::exception&) {
    throw Error(ErrorCode::BadFormat, "tag " + to_string(t) + " is not a decimal: '" + s + "'");
  }
}

std::optional<double> optional_decimal(const DicomMetadata& m, DicomTag t) {
  auto it = m.find(t);
  if (it == m.end() || it->second.empty()) return std::nullopt;
  // multi-valued decimal strings: first value
  return parse_decimal(it->second.substr(0, it->second.find('\\')), t);
}

}  // namespace

std::string to_string(DicomTag t) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "(%04X,%04X)", t.group, t.element);
  return buf;
}

std::optional<double> DicomImage::slice_location() const { return optional_decimal(metadata, tags::SliceLocation); }

std::optional<int> DicomImage::instance_number() const {
  auto v = optional_decimal(metadata, tags::InstanceNumber);
  if (!v) return std::nullopt;
  return static_cast<int>(std::lround(*v));
}

DicomImage parse_dicom(ByteView b) {
  if (b.size() < 132 || std::string_view(reinterpret_cast<const char*>(b.data() + 128), 4) != "DICM")
    throw Error(ErrorCode::MissingPreamble, "no \"DICM\" marker at offset 128");

  DicomMetadata meta;
  std::optional<ByteView> pixel_data;
  std::size_t pixel_declared = 0;
  bool checked_syntax = false;
  std::size_t off = 132;
  while (off + 8 <= b.size()) {
    const auto h = read_element_header(b, off);
    if (!checked_syntax && h.tag.group != 0x0002) {
      checked_syntax = true;
      auto ts = meta.find(tags::TransferSyntaxUID);
      if (ts != meta.end() && ts->second != kExplicitVRLittleEndian)
        throw Error(ErrorCode::UnsupportedTransferSyntax, "transfer syntax " + ts->second);
    }
    off += h.header_size;
    if (h.length == kUndefinedLength) {
      if (h.tag == tags::PixelData)
        throw Error(ErrorCode::UnsupportedTransferSyntax, "encapsulated (compressed) pixel data");
      off = skip_undefined_sequence(b, off);
      continue;
    }
    if (h.tag == tags::PixelData) {
      pixel_declared = h.length;
      const std::size_t avail = std::min<std::size_t>(h.length, b.size() - off);
      pixel_data = b.subspan(off, avail);
      off += avail;
      continue;
    }
    if (off + h.length > b.size())
      throw Error(ErrorCode::TruncatedData, "element " + to_string(h.tag) + " runs past end of file");
    if (h.vr != "SQ") {
      if (auto v = render_value(h.vr, b.subspan(off, h.length))) meta[h.tag] = std::move(*v);
    }
    off += h.length;
  }

  const int rows = static_cast<int>(parse_decimal(require(meta, tags::Rows), tags::Rows));
  const int cols = static_cast<int>(parse_decimal(require(meta, tags::Columns), tags::Columns));
  const int bits = static_cast<int>(parse_decimal(require(meta, tags::BitsAllocated), tags::BitsAllocated));
  const auto& spacing_text = require(meta, tags::PixelSpacing);
  if (!pixel_data) throw Error(ErrorCode::MissingRequiredTag, to_string(tags::PixelData));

  const auto sep = spacing_text.find('\\');
  if (sep == std::string::npos)
    throw Error(ErrorCode::BadFormat, "PixelSpacing needs two values: '" + spacing_text + "'");
  const Spacing spacing{parse_decimal(spacing_text.substr(0, sep), tags::PixelSpacing),
                        parse_decimal(spacing_text.substr(sep + 1), tags::PixelSpacing)};
  if (!is_valid(spacing)) throw Error(ErrorCode::BadFormat, "PixelSpacing must be positive: '" + spacing_text + "'");
  if (bits != 8 && bits != 16) throw Error(ErrorCode::UnsupportedDatatype, "BitsAllocated " + std::to_string(bits));
  if (auto spp = optional_decimal(meta, tags::SamplesPerPixel); spp && *spp != 1)
    throw Error(ErrorCode::UnsupportedDatatype, "SamplesPerPixel must be 1");
  if (rows <= 0 || cols <= 0) throw Error(ErrorCode::BadFormat, "Rows/Columns must be positive");

  const std::size_t bpp = static_cast<std::size_t>(bits / 8);
  const std::size_t need = static_cast<std::size_t>(rows) * cols * bpp;
  if (pixel_declared < need || pixel_data->size() < need)
    throw Error(ErrorCode::PixelDataSizeMismatch, "PixelData holds " + std::to_string(pixel_data->size()) +
                                                      " bytes, Rows x Columns needs " + std::to_string(need));

  const bool is_signed = optional_decimal(meta, tags::PixelRepresentation).value_or(0) == 1;
  const double slope = optional_decimal(meta, tags::RescaleSlope).value_or(1.0);
  const double intercept = optional_decimal(meta, tags::RescaleIntercept).value_or(0.0);

  std::vector<double> px(static_cast<std::size_t>(rows) * cols);
  for (std::size_t i = 0; i < px.size(); ++i) {
    double v;
    if (bpp == 1)
      v = is_signed ? static_cast<std::int8_t>((*pixel_data)[i]) : (*pixel_data)[i];
    else
      v = is_signed ? load<std::int16_t>(*pixel_data, 2 * i) : load<std::uint16_t>(*pixel_data, 2 * i);
    px[i] = v * slope + intercept;
  }
  return {ScalarImage2D(rows, cols, spacing, std::move(px)), std::move(meta)};
}

DicomWriter& DicomWriter::add(DicomTag tag, std::string_view vr, ByteView value) {
  Element e{std::string(vr), Bytes(value.begin(), value.end())};
  if (e.value.size() % 2) e.value.push_back(vr == "UI" ? 0 : (vr == "OB" || vr == "OW" ? 0 : ' '));
  elements_[tag] = std::move(e);
  return *this;
}

DicomWriter& DicomWriter::add_string(DicomTag tag, std::string_view vr, std::string_view value) {
  return add(tag, vr, ByteView(reinterpret_cast<const std::uint8_t*>(value.data()), value.size()));
}

DicomWriter& DicomWriter::add_us(DicomTag tag, std::uint16_t value) {
  Bytes v;
  append<std::uint16_t>(v, value);
  return add(tag, "US", v);
}

DicomWriter& DicomWriter::add_pixels_u16(std::span<const std::uint16_t> pixels) {
  Bytes v;
  v.reserve(pixels.size() * 2);
  for (auto p : pixels) append<std::uint16_t>(v, p);
  return add(tags::PixelData, "OW", v);
}

DicomWriter& DicomWriter::add_pixels_u8(std::span<const std::uint8_t> pixels) {
  return add(tags::PixelData, "OB", ByteView(pixels.data(), pixels.size()));
}

Bytes DicomWriter::finish(std::string_view transfer_syntax) const {
  auto encode_element = [](Bytes& out, DicomTag tag, const std::string& vr, const Bytes& value) {
    append<std::uint16_t>(out, tag.group);
    append<std::uint16_t>(out, tag.element);
    append(out, std::string_view(vr));
    if (long_form_vr(vr)) {
      append<std::uint16_t>(out, 0);
      append<std::uint32_t>(out, static_cast<std::uint32_t>(value.size()));
    } else {
      append<std::uint16_t>(out, static_cast<std::uint16_t>(value.size()));
    }
    out.insert(out.end(), value.begin(), value.end());
  };

  Bytes ts(transfer_syntax.begin(), transfer_syntax.end());
  if (ts.size() % 2) ts.push_back(0);
  Bytes meta;
  encode_element(meta, tags::TransferSyntaxUID, "UI", ts);

  Bytes out(128, 0);
  append(out, std::string_view("DICM"));
  Bytes group_length;
  append<std::uint32_t>(group_length, static_cast<std::uint32_t>(meta.size()));
  encode_element(out, {0x0002, 0x0000}, "UL", group_length);
  out.insert(out.end(), meta.begin(), meta.end());
  for (const auto& [tag, e] : elements_) {
    if (tag.group == 0x0002) continue;
    encode_element(out, tag, e.vr, e.value);
  }
  return out;
}

Bytes encode_dicom_slice(const ScalarImage2D& img, std::string_view patient_id, int instance_number,
                         std::optional<double> slice_location) {
  std::vector<std::uint16_t> px(img.size());
  for (std::size_t i = 0; i < px.size(); ++i)
    px[i] = static_cast<std::uint16_t>(std::clamp(std::lround(img.data()[i]), 0L, 65535L));
  DicomWriter w;
  w.add_string(tags::PatientID, "LO", patient_id)
      .add_string(tags::InstanceNumber, "IS", std::to_string(instance_number))
      .add_us(tags::SamplesPerPixel, 1)
      .add_us(tags::Rows, static_cast<std::uint16_t>(img.height()))
      .add_us(tags::Columns, static_cast<std::uint16_t>(img.width()))
      .add_string(tags::PixelSpacing, "DS",
                  format_real(img.spacing().row_mm) + "\\" + format_real(img.spacing().col_mm))
      .add_us(tags::BitsAllocated, 16)
      .add_us(tags::BitsStored, 16)
      .add_us(tags::PixelRepresentation, 0)
      .add_pixels_u16(px);
  if (slice_location) w.add_string(tags::SliceLocation, "DS", format_real(*slice_location));
  return w.finish();
}

}  // namespace cardioseg::ingest
