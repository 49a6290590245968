#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cardioseg/core/bytes.hpp"

namespace cardioseg {

/// Narrow blob store keyed by '/'-separated relative names.
class Storage {
 public:
  virtual ~Storage() = default;

  virtual void put(const std::string& key, ByteView bytes) = 0;
  virtual Bytes get(const std::string& key) const = 0;
  virtual bool exists(const std::string& key) const = 0;
  /// Keys under `prefix`, sorted.
  virtual std::vector<std::string> list(const std::string& prefix) const = 0;

  void put_text(const std::string& key, std::string_view text);
  std::string get_text(const std::string& key) const;
};

class LocalStorage final : public Storage {
 public:
  explicit LocalStorage(std::filesystem::path root);

  void put(const std::string& key, ByteView bytes) override;
  Bytes get(const std::string& key) const override;
  bool exists(const std::string& key) const override;
  std::vector<std::string> list(const std::string& prefix) const override;

  const std::filesystem::path& root() const noexcept { return root_; }
  std::filesystem::path path_of(const std::string& key) const;

 private:
  std::filesystem::path root_;
};

}  // namespace cardioseg
