#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "cardioseg/core/bytes.hpp"
#include "cardioseg/core/image.hpp"

namespace cardioseg::ingest {

struct DicomTag {
  std::uint16_t group = 0;
  std::uint16_t element = 0;

  auto operator<=>(const DicomTag&) const = default;
};

std::string to_string(DicomTag t);

namespace tags {
inline constexpr DicomTag TransferSyntaxUID{0x0002, 0x0010};
inline constexpr DicomTag SOPInstanceUID{0x0008, 0x0018};
inline constexpr DicomTag PatientID{0x0010, 0x0020};
inline constexpr DicomTag SliceThickness{0x0018, 0x0050};
inline constexpr DicomTag TriggerTime{0x0018, 0x1060};
inline constexpr DicomTag SeriesNumber{0x0020, 0x0011};
inline constexpr DicomTag InstanceNumber{0x0020, 0x0013};
inline constexpr DicomTag SliceLocation{0x0020, 0x1041};
inline constexpr DicomTag SamplesPerPixel{0x0028, 0x0002};
inline constexpr DicomTag Rows{0x0028, 0x0010};
inline constexpr DicomTag Columns{0x0028, 0x0011};
inline constexpr DicomTag PixelSpacing{0x0028, 0x0030};
inline constexpr DicomTag BitsAllocated{0x0028, 0x0100};
inline constexpr DicomTag BitsStored{0x0028, 0x0101};
inline constexpr DicomTag PixelRepresentation{0x0028, 0x0103};
inline constexpr DicomTag RescaleIntercept{0x0028, 0x1052};
inline constexpr DicomTag RescaleSlope{0x0028, 0x1053};
inline constexpr DicomTag PixelData{0x7FE0, 0x0010};
}  // namespace tags

inline constexpr std::string_view kExplicitVRLittleEndian = "1.2.840.10008.1.2.1";

/// Textual value of every non-binary element: strings with padding trimmed,
/// binary numbers (US, SS, UL, SL, FL, FD) as decimals, multiple values joined by '\'.
using DicomMetadata = std::map<DicomTag, std::string>;

struct DicomImage {
  ScalarImage2D image;
  DicomMetadata metadata;

  std::optional<double> slice_location() const;
  std::optional<int> instance_number() const;
};

/// Reads a Part-10 file: 128-byte preamble, "DICM", then explicit-VR little-endian
/// elements. Sequences (defined or undefined length) are skipped. Implicit VR,
/// big-endian, and encapsulated pixel data raise UnsupportedTransferSyntax.
DicomImage parse_dicom(ByteView bytes);

/// Builds explicit-VR little-endian Part-10 files, used for fixtures and exports.
class DicomWriter {
 public:
  DicomWriter& add(DicomTag tag, std::string_view vr, ByteView value);
  DicomWriter& add_string(DicomTag tag, std::string_view vr, std::string_view value);
  DicomWriter& add_us(DicomTag tag, std::uint16_t value);
  DicomWriter& add_pixels_u16(std::span<const std::uint16_t> pixels);
  DicomWriter& add_pixels_u8(std::span<const std::uint8_t> pixels);

  Bytes finish(std::string_view transfer_syntax = kExplicitVRLittleEndian) const;

 private:
  struct Element {
    std::string vr;
    Bytes value;
  };
  std::map<DicomTag, Element> elements_;
};

/// Writes a 16-bit grayscale slice with the tags parse_dicom needs; pixel values
/// are rounded and clamped to [0, 65535].
Bytes encode_dicom_slice(const ScalarImage2D& img, std::string_view patient_id, int instance_number,
                         std::optional<double> slice_location);

}  // namespace cardioseg::ingest
