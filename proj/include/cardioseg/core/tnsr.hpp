#pragma once

// TNSR tensor container, little-endian throughout:
//
//   offset 0  "TNSR"
//          4  u8 version (= 1)
//          5  u8 dtype code: 0 = f32, 1 = u8, 2 = f64
//          6  u8 rank
//          7  rank x u32 dims
//          .. row-major payload
//
// Images are stored as rank-2 f32 [height, width], masks as rank-2 u8. Checkpoints use f64.

#include <cstdint>
#include <vector>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/core/image.hpp"

namespace cardioseg::tnsr {

inline constexpr std::uint8_t kVersion = 1;

enum class DType : std::uint8_t { F32 = 0, U8 = 1, F64 = 2 };

struct Array {
  DType dtype = DType::F32;
  std::vector<std::uint32_t> dims;
  std::vector<double> values;

  std::size_t element_count() const;
};

Bytes encode(const Array& a);
Array decode(ByteView bytes);
/// Like decode, but reports how many bytes the blob occupied.
Array decode_prefix(ByteView bytes, std::size_t& consumed);

Bytes encode_image(const ScalarImage2D& img);
Bytes encode_mask(const LabelMask2D& mask);
ScalarImage2D decode_image(ByteView bytes, Spacing spacing);
/// Validates that every class value lies in {0,1,2,3}.
LabelMask2D decode_mask(ByteView bytes, Spacing spacing);

}  // namespace cardioseg::tnsr
