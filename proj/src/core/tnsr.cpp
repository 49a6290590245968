#include "cardioseg/core/tnsr.hpp"

#include <cmath>

namespace cardioseg::tnsr {

namespace {

std::size_t dtype_size(DType d) {
  switch (d) {
    case DType::F32: return 4;
    case DType::U8: return 1;
    case DType::F64: return 8;
  }
  throw Error(ErrorCode::BadFormat, "unknown TNSR dtype");
}

}  // namespace

std::size_t Array::element_count() const {
  std::size_t n = 1;
  for (auto d : dims) n *= d;
  return n;
}

Bytes encode(const Array& a) {
  if (a.dims.size() > 255) throw Error(ErrorCode::BadFormat, "TNSR rank too large");
  if (a.values.size() != a.element_count()) throw Error(ErrorCode::ShapeMismatch, "TNSR payload does not match dims");
  Bytes out;
  out.reserve(7 + 4 * a.dims.size() + a.values.size() * dtype_size(a.dtype));
  append(out, std::string_view("TNSR"));
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(a.dtype));
  out.push_back(static_cast<std::uint8_t>(a.dims.size()));
  for (auto d : a.dims) append<std::uint32_t>(out, d);
  for (double v : a.values) {
    switch (a.dtype) {
      case DType::F32: append<float>(out, static_cast<float>(v)); break;
      case DType::F64: append<double>(out, v); break;
      case DType::U8:
        if (!(v >= 0 && v <= 255 && v == std::floor(v)))
          throw Error(ErrorCode::BadFormat, "value not representable as u8");
        out.push_back(static_cast<std::uint8_t>(v));
        break;
    }
  }
  return out;
}

Array decode_prefix(ByteView bytes, std::size_t& consumed) {
  if (bytes.size() < 7 || std::string_view(reinterpret_cast<const char*>(bytes.data()), 4) != "TNSR")
    throw Error(ErrorCode::BadMagic, "not a TNSR blob");
  if (bytes[4] != kVersion)
    throw Error(ErrorCode::BadFormat, "unsupported TNSR version " + std::to_string(bytes[4]));
  Array a;
  if (bytes[5] > 2) throw Error(ErrorCode::UnsupportedDatatype, "TNSR dtype code " + std::to_string(bytes[5]));
  a.dtype = static_cast<DType>(bytes[5]);
  const std::size_t rank = bytes[6];
  std::size_t off = 7;
  for (std::size_t i = 0; i < rank; ++i, off += 4) a.dims.push_back(load<std::uint32_t>(bytes, off));
  const std::size_t n = a.element_count();
  const std::size_t width = dtype_size(a.dtype);
  if (off + n * width > bytes.size()) throw Error(ErrorCode::TruncatedData, "TNSR payload shorter than dims");
  a.values.resize(n);
  for (std::size_t i = 0; i < n; ++i, off += width) {
    switch (a.dtype) {
      case DType::F32: a.values[i] = load<float>(bytes, off); break;
      case DType::F64: a.values[i] = load<double>(bytes, off); break;
      case DType::U8: a.values[i] = bytes[off]; break;
    }
  }
  consumed = off;
  return a;
}

Array decode(ByteView bytes) {
  std::size_t consumed = 0;
  auto a = decode_prefix(bytes, consumed);
  if (consumed != bytes.size()) throw Error(ErrorCode::BadFormat, "trailing bytes after TNSR payload");
  return a;
}

Bytes encode_image(const ScalarImage2D& img) {
  Array a{DType::F32,
          {static_cast<std::uint32_t>(img.height()), static_cast<std::uint32_t>(img.width())},
          {img.data().begin(), img.data().end()}};
  return encode(a);
}

Bytes encode_mask(const LabelMask2D& mask) {
  Array a{DType::U8,
          {static_cast<std::uint32_t>(mask.height()), static_cast<std::uint32_t>(mask.width())},
          {mask.data().begin(), mask.data().end()}};
  return encode(a);
}

ScalarImage2D decode_image(ByteView bytes, Spacing spacing) {
  auto a = decode(bytes);
  if (a.dims.size() != 2) throw Error(ErrorCode::ShapeMismatch, "image TNSR must be rank 2");
  return ScalarImage2D(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), spacing, std::move(a.values));
}

LabelMask2D decode_mask(ByteView bytes, Spacing spacing) {
  auto a = decode(bytes);
  if (a.dims.size() != 2) throw Error(ErrorCode::ShapeMismatch, "mask TNSR must be rank 2");
  if (a.dtype != DType::U8) throw Error(ErrorCode::UnsupportedDatatype, "mask TNSR must be u8");
  std::vector<std::uint8_t> px(a.values.begin(), a.values.end());
  LabelMask2D m(static_cast<int>(a.dims[0]), static_cast<int>(a.dims[1]), spacing, std::move(px));
  validate_mask(m);
  return m;
}

}  // namespace cardioseg::tnsr
