// Layered run configuration: built-in defaults < config file < command-line flags.

#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sopseg/errors.hpp"

namespace sopseg {

enum class ValueSource { Default, File, Flag };

std::string to_string(ValueSource s);

class RunConfig {
 public:
  /// All known keys with their built-in defaults.
  static RunConfig defaults();

  /// Merges a JSON object. Keys may be dotted ("train.epochs": 8), nested
  /// ({"train": {"epochs": 8}}), or resolved entries ({"value": 8, "source": ...})
  /// as written by write(). Throws ConfigError on unknown keys or wrong types.
  void merge_file(const std::filesystem::path& path);

  /// Parses `raw` as JSON when possible, else takes it as a string.
  void set_flag(const std::string& key, const std::string& raw);
  /// "key=value" form of set_flag.
  void set_assignment(const std::string& assignment);

  void set(const std::string& key, nlohmann::json value, ValueSource source);

  bool has(const std::string& key) const { return entries_.count(key) != 0; }
  ValueSource source(const std::string& key) const;
  const nlohmann::json& value(const std::string& key) const;

  template <typename T>
  T get(const std::string& key) const {
    try {
      return value(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError("config key '" + key + "' has the wrong type");
    }
  }

  std::vector<std::string> keys() const;

  /// {"key": {"value": v, "source": "default|file|flag"}, ...}
  nlohmann::json to_json() const;

  /// Writes dir/run_config.json and returns its path.
  std::filesystem::path write(const std::filesystem::path& dir) const;

 private:
  struct Entry {
    nlohmann::json value;
    ValueSource source = ValueSource::Default;
  };
  std::map<std::string, Entry> entries_;
};

}  // namespace sopseg
