#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cardioseg/core/error.hpp"

namespace cardioseg {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

template <class T>
T byteswap_value(T v) {
  std::uint8_t buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(buf[i], buf[sizeof(T) - 1 - i]);
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

/// Reads a trivially copyable value at `offset`; `little` selects the stored byte order.
template <class T>
T load(ByteView bytes, std::size_t offset, bool little = true) {
  if (offset + sizeof(T) > bytes.size()) throw Error(ErrorCode::TruncatedData, "read past end of buffer");
  T v;
  std::memcpy(&v, bytes.data() + offset, sizeof(T));
  if (little != (std::endian::native == std::endian::little)) v = byteswap_value(v);
  return v;
}

template <class T>
void append(Bytes& out, T v) {
  if constexpr (std::endian::native != std::endian::little) v = byteswap_value(v);
  const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
  out.insert(out.end(), p, p + sizeof(T));
}

template <class T>
void store(Bytes& out, std::size_t offset, T v) {
  if constexpr (std::endian::native != std::endian::little) v = byteswap_value(v);
  std::memcpy(out.data() + offset, &v, sizeof(T));
}

inline void append(Bytes& out, std::string_view s) { out.insert(out.end(), s.begin(), s.end()); }

Bytes read_file(const std::filesystem::path& p);
void write_file(const std::filesystem::path& p, ByteView bytes);
std::string read_text_file(const std::filesystem::path& p);
void write_text_file(const std::filesystem::path& p, std::string_view text);

bool is_gzip(ByteView bytes);
Bytes gunzip(ByteView bytes);
Bytes gzip(ByteView bytes);
/// CRC-32 (zlib polynomial) rendered as 8 lowercase hex digits.
std::string crc32_hex(ByteView bytes);

/// Shortest round-trip decimal rendering of a double.
std::string format_real(double v);

}  // namespace cardioseg
