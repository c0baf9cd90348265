#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace nilmbench {

// Invalid-config diagnostic naming the offending field.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Rejects fields outside the allowed set (fail-fast reproducibility: a typo
// must not silently fall back to a default).
void check_fields(const nlohmann::json& obj, const std::string& ctx,
                  const std::vector<std::string>& allowed);

nlohmann::json load_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& value);

template <typename T>
T get_field(const nlohmann::json& obj, const std::string& ctx, const std::string& key) {
  if (!obj.contains(key)) throw ConfigError(ctx + "." + key + ": missing required field");
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(ctx + "." + key + ": wrong type");
  }
}

template <typename T>
T get_field_or(const nlohmann::json& obj, const std::string& ctx, const std::string& key,
               T fallback) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(ctx + "." + key + ": wrong type");
  }
}

}  // namespace nilmbench
