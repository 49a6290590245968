#pragma once

// INI-style configuration:
//
//   # comment
//   [section]
//   key = value
//
// Keys are addressed as "section.key"; keys before any section header live at top level.

#include <boost/property_tree/ptree.hpp>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cardioseg/core/error.hpp"

namespace cardioseg {

class Config {
 public:
  Config() = default;

  static Config parse(const std::string& text);
  static Config load(const std::filesystem::path& path);

  bool has(const std::string& path) const;
  std::optional<std::string> find(const std::string& path) const;
  std::string get(const std::string& path) const;
  std::string get(const std::string& path, const std::string& fallback) const;
  double get_real(const std::string& path, double fallback) const;
  long long get_int(const std::string& path, long long fallback) const;
  bool get_bool(const std::string& path, bool fallback) const;

  std::vector<std::string> sections() const;
  /// Key names inside `section`, in file order.
  std::vector<std::string> keys(const std::string& section) const;

 private:
  boost::property_tree::ptree tree_;
};

}  // namespace cardioseg
