#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace pintoc {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Flat key-value configuration with dotted section keys
/// (problem.gamma = 1). Lines are `key = value`; '#' starts a comment.
/// Serialization is sorted and stable so emitted configs are diff-friendly
/// provenance records.
class Config {
 public:
  static Config parse_file(const std::string& path);
  static Config parse_string(const std::string& text);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  std::string get_string(const std::string& key) const;
  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key) const;
  int get_int(const std::string& key, int fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
  std::vector<double> get_double_list(const std::string& key) const;
  std::vector<int> get_int_list(const std::string& key) const;
  std::vector<std::string> get_string_list(const std::string& key) const;

  /// Overlay other's entries on top of this one.
  void merge(const Config& other);

  std::string serialize() const;
  const std::map<std::string, std::string>& entries() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace pintoc
