#include "cardioseg/core/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <sstream>

#include "cardioseg/core/bytes.hpp"

namespace pt = boost::property_tree;

namespace cardioseg {

namespace {

pt::ptree::path_type make_path(const std::string& path) {
  // '|' never appears in keys; lets values keep dots in section/key names intact
  const auto dot = path.find('.');
  if (dot == std::string::npos) return pt::ptree::path_type(path, '|');
  return pt::ptree::path_type(path.substr(0, dot) + "|" + path.substr(dot + 1), '|');
}

}  // namespace

Config Config::parse(const std::string& text) {
  Config c;
  std::istringstream in(text);
  try {
    pt::read_ini(in, c.tree_);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidConfig, e.what());
  }
  return c;
}

Config Config::load(const std::filesystem::path& path) {
  try {
    return parse(read_text_file(path));
  } catch (const Error& e) {
    rethrow_with_context(e, path.string());
  }
}

std::optional<std::string> Config::find(const std::string& path) const {
  if (auto v = tree_.get_optional<std::string>(make_path(path))) return *v;
  return std::nullopt;
}

bool Config::has(const std::string& path) const { return find(path).has_value(); }

std::string Config::get(const std::string& path) const {
  if (auto v = find(path)) return *v;
  throw Error(ErrorCode::InvalidConfig, "missing config key '" + path + "'");
}

std::string Config::get(const std::string& path, const std::string& fallback) const {
  return find(path).value_or(fallback);
}

double Config::get_real(const std::string& path, double fallback) const {
  auto v = find(path);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    double d = std::stod(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return d;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "key '" + path + "' is not a number: " + *v);
  }
}

long long Config::get_int(const std::string& path, long long fallback) const {
  auto v = find(path);
  if (!v) return fallback;
  try {
    std::size_t used = 0;
    long long i = std::stoll(*v, &used);
    if (used != v->size()) throw std::invalid_argument("trailing");
    return i;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidConfig, "key '" + path + "' is not an integer: " + *v);
  }
}

bool Config::get_bool(const std::string& path, bool fallback) const {
  auto v = find(path);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw Error(ErrorCode::InvalidConfig, "key '" + path + "' is not a boolean: " + *v);
}

std::vector<std::string> Config::sections() const {
  std::vector<std::string> out;
  for (const auto& [name, child] : tree_)
    if (!child.empty()) out.push_back(name);
  return out;
}

std::vector<std::string> Config::keys(const std::string& section) const {
  std::vector<std::string> out;
  auto child = tree_.get_child_optional(pt::ptree::path_type(section, '|'));
  if (!child) return out;
  for (const auto& [name, _] : *child) out.push_back(name);
  return out;
}

}  // namespace cardioseg
