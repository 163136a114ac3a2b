#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace vecdenoise::pipeline {

/// Flat "key = value" settings. '#' starts a comment; blank lines are
/// ignored. Later assignments (including command-line overrides) win.
class Config {
 public:
  /// Throws ConfigError with the offending line number on malformed lines or
  /// unknown keys.
  static Config parse(std::istream& in, const std::string& source = "config");
  static Config load(const std::filesystem::path& path);

  /// Throws ConfigError for unknown keys.
  void set(const std::string& key, std::string value);
  bool has(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;

  std::string get(std::string_view key, std::string_view fallback) const;
  double get_double(std::string_view key, double fallback) const;
  long long get_int(std::string_view key, long long fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  /// Comma-separated list; empty when unset.
  std::vector<std::string> get_list(std::string_view key) const;
  std::vector<double> get_double_list(std::string_view key, std::vector<double> fallback) const;

  static const std::vector<std::string>& known_keys();

 private:
  std::map<std::string, std::string, std::less<>> values_;
};

}  // namespace vecdenoise::pipeline
