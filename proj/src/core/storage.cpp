#include "cardioseg/core/storage.hpp"

#include <algorithm>

namespace fs = std::filesystem;

namespace cardioseg {

void Storage::put_text(const std::string& key, std::string_view text) {
  put(key, ByteView(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string Storage::get_text(const std::string& key) const {
  auto b = get(key);
  return std::string(b.begin(), b.end());
}

LocalStorage::LocalStorage(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path LocalStorage::path_of(const std::string& key) const {
  if (key.find("..") != std::string::npos) throw Error(ErrorCode::IoError, "storage key escapes root: " + key);
  return root_ / fs::path(key);
}

void LocalStorage::put(const std::string& key, ByteView bytes) { write_file(path_of(key), bytes); }

Bytes LocalStorage::get(const std::string& key) const { return read_file(path_of(key)); }

bool LocalStorage::exists(const std::string& key) const { return fs::exists(path_of(key)); }

std::vector<std::string> LocalStorage::list(const std::string& prefix) const {
  std::vector<std::string> keys;
  const fs::path base = prefix.empty() ? root_ : path_of(prefix);
  if (!fs::exists(base)) return keys;
  if (fs::is_regular_file(base)) return {prefix};
  for (const auto& e : fs::recursive_directory_iterator(base)) {
    if (e.is_regular_file()) keys.push_back(fs::relative(e.path(), root_).generic_string());
  }
  std::sort(keys.begin(), keys.end());
  return keys;
}

}  // namespace cardioseg
