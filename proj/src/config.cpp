#include "nilmbench/config.hpp"

#include <algorithm>
#include <fstream>

namespace nilmbench {

void check_fields(const nlohmann::json& obj, const std::string& ctx,
                  const std::vector<std::string>& allowed) {
  if (!obj.is_object()) throw ConfigError(ctx + ": expected an object");
  for (const auto& item : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), item.key()) == allowed.end()) {
      throw ConfigError(ctx + "." + item.key() + ": unknown field");
    }
  }
}

nlohmann::json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void write_json_file(const std::string& path, const nlohmann::json& value) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path);
  out << value.dump(2) << "\n";
}

}  // namespace nilmbench
