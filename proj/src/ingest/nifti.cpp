#include "cardioseg/ingest/nifti.hpp"

#include <cmath>
#include <cstring>

namespace cardioseg::ingest {

namespace {

constexpr std::size_t kHeaderSize = 348;
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffMagic = 344;

int bytes_per_voxel(NiftiDatatype t) {
  switch (t) {
    case NiftiDatatype::UInt8: return 1;
    case NiftiDatatype::Int16:
    case NiftiDatatype::UInt16: return 2;
    case NiftiDatatype::Int32:
    case NiftiDatatype::Float32: return 4;
    case NiftiDatatype::Float64: return 8;
  }
  return 0;
}

bool known_datatype(std::int16_t code) {
  switch (code) {
    case 2: case 4: case 8: case 16: case 64: case 512: return true;
    default: return false;
  }
}

double read_voxel(ByteView b, std::size_t off, NiftiDatatype t, bool little) {
  switch (t) {
    case NiftiDatatype::UInt8: return b[off];
    case NiftiDatatype::Int16: return load<std::int16_t>(b, off, little);
    case NiftiDatatype::UInt16: return load<std::uint16_t>(b, off, little);
    case NiftiDatatype::Int32: return load<std::int32_t>(b, off, little);
    case NiftiDatatype::Float32: return load<float>(b, off, little);
    case NiftiDatatype::Float64: return load<double>(b, off, little);
  }
  return 0;
}

struct Header {
  bool little = true;
  int ndim = 0;
  int dims[4] = {1, 1, 1, 1};
  NiftiDatatype datatype = NiftiDatatype::Float32;
  double pixdim[3] = {1, 1, 1};
  std::size_t vox_offset = kHeaderSize;
  double slope = 0;
  double inter = 0;
};

Header read_header(ByteView b) {
  if (b.size() < kHeaderSize) throw Error(ErrorCode::TruncatedData, "file shorter than the 348-byte NIfTI header");
  const char* magic = reinterpret_cast<const char*>(b.data() + kOffMagic);
  if (std::memcmp(magic, "n+1\0", 4) != 0 && std::memcmp(magic, "ni1\0", 4) != 0)
    throw Error(ErrorCode::BadMagic, "NIfTI magic is not \"n+1\" or \"ni1\"");
  // "ni1" pairs are read as the .hdr bytes followed by the .img bytes

  Header h;
  auto dim0 = load<std::int16_t>(b, kOffDim, true);
  if (dim0 < 1 || dim0 > 7) {
    h.little = false;
    dim0 = load<std::int16_t>(b, kOffDim, false);
    if (dim0 < 1 || dim0 > 7) throw Error(ErrorCode::BadFormat, "dim[0] outside [1,7] in either byte order");
  }
  h.ndim = dim0;
  if (h.ndim < 2 || h.ndim > 4)
    throw Error(ErrorCode::UnsupportedDimensions, "NIfTI rank " + std::to_string(h.ndim) + " (need 2, 3 or 4)");
  for (int i = 0; i < h.ndim; ++i) {
    h.dims[i] = load<std::int16_t>(b, kOffDim + 2 * (i + 1), h.little);
    if (h.dims[i] < 1) throw Error(ErrorCode::BadFormat, "non-positive NIfTI dimension");
  }
  const auto code = load<std::int16_t>(b, kOffDatatype, h.little);
  if (!known_datatype(code)) throw Error(ErrorCode::UnsupportedDatatype, "NIfTI datatype code " + std::to_string(code));
  h.datatype = static_cast<NiftiDatatype>(code);
  for (int i = 0; i < 3; ++i) h.pixdim[i] = load<float>(b, kOffPixdim + 4 * (i + 1), h.little);
  const double vox = load<float>(b, kOffVoxOffset, h.little);
  h.vox_offset = vox < static_cast<double>(kHeaderSize) ? kHeaderSize : static_cast<std::size_t>(vox);
  h.slope = load<float>(b, kOffSclSlope, h.little);
  h.inter = load<float>(b, kOffSclInter, h.little);
  return h;
}

Spacing spacing_of(const Header& h) {
  // non-positive spacing in the wild is treated as 1 mm
  auto fix = [](double v) { return (std::isfinite(v) && v > 0) ? std::abs(v) : 1.0; };
  return {fix(h.pixdim[1]), fix(h.pixdim[0])};
}

}  // namespace

std::vector<NiftiSlice> parse_nifti(ByteView raw) {
  Bytes inflated;
  ByteView b = raw;
  if (is_gzip(raw)) {
    inflated = gunzip(raw);
    b = inflated;
  }
  const Header h = read_header(b);
  const int width = h.dims[0], height = h.dims[1], slices = h.dims[2], frames = h.dims[3];
  const std::size_t bpv = bytes_per_voxel(h.datatype);
  const std::size_t plane = static_cast<std::size_t>(width) * height;
  const std::size_t total = plane * slices * frames;
  if (h.vox_offset + total * bpv > b.size())
    throw Error(ErrorCode::TruncatedData, "declared dims need " + std::to_string(total * bpv) + " payload bytes, have " +
                                              std::to_string(b.size() - std::min(b.size(), h.vox_offset)));

  const Spacing spacing = spacing_of(h);
  const bool scale = h.slope != 0 && std::isfinite(h.slope);
  std::vector<NiftiSlice> out;
  out.reserve(static_cast<std::size_t>(slices) * frames);
  for (int t = 0; t < frames; ++t) {
    for (int z = 0; z < slices; ++z) {
      std::vector<double> px(plane);
      std::size_t off = h.vox_offset + (static_cast<std::size_t>(t) * slices + z) * plane * bpv;
      for (std::size_t i = 0; i < plane; ++i, off += bpv) {
        double v = read_voxel(b, off, h.datatype, h.little);
        px[i] = scale ? v * h.slope + h.inter : v;
      }
      out.push_back({t, z, ScalarImage2D(height, width, spacing, std::move(px))});
    }
  }
  return out;
}

std::vector<NiftiMaskSlice> parse_nifti_mask(ByteView bytes) {
  std::vector<NiftiMaskSlice> out;
  for (auto& s : parse_nifti(bytes)) {
    LabelMask2D m(s.image.height(), s.image.width(), s.image.spacing());
    for (std::size_t i = 0; i < s.image.size(); ++i) {
      const double v = s.image.data()[i];
      if (!(v >= 0 && v < kNumClasses && v == std::floor(v)))
        throw Error(ErrorCode::InvalidMask, "label value " + format_real(v) + " outside {0,1,2,3}");
      m.data()[i] = static_cast<std::uint8_t>(v);
    }
    out.push_back({s.frame_index, s.slice_index, std::move(m)});
  }
  return out;
}

Bytes encode_nifti(const NiftiVolume& vol) {
  const std::size_t total = static_cast<std::size_t>(vol.width) * vol.height * vol.slices * vol.frames;
  if (vol.values.size() != total) throw Error(ErrorCode::ShapeMismatch, "NIfTI volume payload does not match dims");
  const std::int16_t ndim = vol.frames > 1 ? 4 : (vol.slices > 1 ? 3 : 2);
  const int bpv = bytes_per_voxel(vol.datatype);

  Bytes out(kHeaderSize + 4, 0);  // header + empty extension flag
  store<std::int32_t>(out, 0, 348);
  store<std::int16_t>(out, kOffDim, ndim);
  const std::int16_t dims[7] = {static_cast<std::int16_t>(vol.width), static_cast<std::int16_t>(vol.height),
                                static_cast<std::int16_t>(vol.slices), static_cast<std::int16_t>(vol.frames), 1, 1, 1};
  for (int i = 0; i < 7; ++i) store<std::int16_t>(out, kOffDim + 2 * (i + 1), dims[i]);
  store<std::int16_t>(out, kOffDatatype, static_cast<std::int16_t>(vol.datatype));
  store<std::int16_t>(out, kOffBitpix, static_cast<std::int16_t>(8 * bpv));
  const float pixdim[8] = {1.0f, static_cast<float>(vol.spacing.col_mm), static_cast<float>(vol.spacing.row_mm), 1, 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store<float>(out, kOffPixdim + 4 * i, pixdim[i]);
  store<float>(out, kOffVoxOffset, static_cast<float>(kHeaderSize + 4));
  store<float>(out, kOffSclSlope, 0.0f);
  store<float>(out, kOffSclInter, 0.0f);
  std::memcpy(out.data() + kOffMagic, "n+1\0", 4);

  out.reserve(out.size() + total * bpv);
  for (double v : vol.values) {
    switch (vol.datatype) {
      case NiftiDatatype::UInt8: out.push_back(static_cast<std::uint8_t>(v)); break;
      case NiftiDatatype::Int16: append<std::int16_t>(out, static_cast<std::int16_t>(v)); break;
      case NiftiDatatype::UInt16: append<std::uint16_t>(out, static_cast<std::uint16_t>(v)); break;
      case NiftiDatatype::Int32: append<std::int32_t>(out, static_cast<std::int32_t>(v)); break;
      case NiftiDatatype::Float32: append<float>(out, static_cast<float>(v)); break;
      case NiftiDatatype::Float64: append<double>(out, v); break;
    }
  }
  return out;
}

NiftiVolume volume_from_images(std::span<const ScalarImage2D> images, int slices, int frames, NiftiDatatype datatype) {
  if (images.empty() || static_cast<int>(images.size()) != slices * frames)
    throw Error(ErrorCode::ShapeMismatch, "image count must equal slices x frames");
  NiftiVolume vol;
  vol.width = images.front().width();
  vol.height = images.front().height();
  vol.slices = slices;
  vol.frames = frames;
  vol.spacing = images.front().spacing();
  vol.datatype = datatype;
  for (const auto& img : images) {
    if (!img.same_shape(images.front())) throw Error(ErrorCode::ShapeMismatch, "images differ in size");
    vol.values.insert(vol.values.end(), img.data().begin(), img.data().end());
  }
  return vol;
}

}  // namespace cardioseg::ingest
