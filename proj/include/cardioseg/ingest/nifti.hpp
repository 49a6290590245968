#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/core/image.hpp"

namespace cardioseg::ingest {

enum class NiftiDatatype : std::int16_t {
  UInt8 = 2,
  Int16 = 4,
  Int32 = 8,
  Float32 = 16,
  Float64 = 64,
  UInt16 = 512,
};

struct NiftiSlice {
  int frame_index = 0;
  int slice_index = 0;
  ScalarImage2D image;
};

/// Splits a NIfTI-1 volume (single file, optionally gzip-compressed) into 2-D images.
///
/// The x axis (dim[1]) runs along image columns and y (dim[2]) along rows, so the
/// payload's x-fastest order is already row-major. Axis 3 is the slice, axis 4 the frame.
/// Spacing is (pixdim[2], pixdim[1]). scl_slope/scl_inter are applied when slope != 0.
/// Both byte orders are accepted; the order is detected from dim[0].
std::vector<NiftiSlice> parse_nifti(ByteView bytes);

/// Parses a label volume and converts each slice into a validated mask.
struct NiftiMaskSlice {
  int frame_index = 0;
  int slice_index = 0;
  LabelMask2D mask;
};
std::vector<NiftiMaskSlice> parse_nifti_mask(ByteView bytes);

struct NiftiVolume {
  int width = 0;
  int height = 0;
  int slices = 1;
  int frames = 1;
  Spacing spacing{};
  NiftiDatatype datatype = NiftiDatatype::Float32;
  /// x-fastest, then y, slice, frame.
  std::vector<double> values;
};

/// Little-endian single-file ("n+1") encoding; dim[0] is the smallest rank that
/// holds the volume (2, 3 or 4).
Bytes encode_nifti(const NiftiVolume& vol);

/// Stacks equally sized images (slice-major within each frame) into a volume.
NiftiVolume volume_from_images(std::span<const ScalarImage2D> images, int slices, int frames,
                               NiftiDatatype datatype = NiftiDatatype::Float32);

}  // namespace cardioseg::ingest
