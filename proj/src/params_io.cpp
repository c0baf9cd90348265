#include "nilmbench/params_io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace nilmbench {

namespace {

constexpr char kMagic[8] = {'N', 'B', 'M', 'P', '0', '0', '0', '1'};

nlohmann::json arch_to_json(const ArchSpec& arch) {
  nlohmann::json conv = nlohmann::json::array();
  for (const auto& layer : arch.conv) {
    conv.push_back({{"filters", layer.filters}, {"kernel", layer.kernel}});
  }
  return {{"window_size", arch.window_size},
          {"conv", conv},
          {"dense_width", arch.dense_width},
          {"n_tasks", arch.n_tasks}};
}

ArchSpec arch_from_json(const nlohmann::json& j) {
  ArchSpec arch;
  arch.window_size = j.at("window_size").get<int>();
  arch.dense_width = j.at("dense_width").get<int>();
  arch.n_tasks = j.at("n_tasks").get<int>();
  for (const auto& layer : j.at("conv")) {
    arch.conv.push_back({layer.at("filters").get<int>(), layer.at("kernel").get<int>()});
  }
  return arch;
}

nlohmann::json make_header(const ModelParams& params) {
  nlohmann::json header;
  header["version"] = 1;
  header["arch"] = arch_to_json(params.arch);
  header["freeze_mask"] = params.freeze_mask;
  nlohmann::json arrays = nlohmann::json::array();
  for_each_param_array(params, [&](int layer, const std::vector<double>& a) {
    arrays.push_back({{"layer", layer}, {"size", a.size()}});
  });
  header["arrays"] = arrays;
  return header;
}

}  // namespace

void save_params(const std::string& path, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);

  const std::string header = make_header(params).dump();
  const std::uint64_t header_len = header.size();
  out.write(kMagic, sizeof(kMagic));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for_each_param_array(params, [&](int, const std::vector<double>& a) {
    out.write(reinterpret_cast<const char*>(a.data()),
              static_cast<std::streamsize>(a.size() * sizeof(double)));
  });
  if (!out) throw std::runtime_error("write failed: " + path);
}

ModelParams load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);

  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a parameter file");
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || header_len > (1u << 20)) throw std::runtime_error(path + ": bad header");
  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw std::runtime_error(path + ": truncated header");

  const nlohmann::json header = nlohmann::json::parse(header_str);
  if (header.at("version").get<int>() != 1) {
    throw std::runtime_error(path + ": unsupported version");
  }
  const ArchSpec arch = arch_from_json(header.at("arch"));

  // rebuild the structure with correct shapes, then fill arrays in order
  ModelParams params = build_from_arch(arch, 0);
  params.freeze_mask = header.at("freeze_mask").get<std::vector<std::uint8_t>>();
  if (params.freeze_mask.size() != static_cast<std::size_t>(arch.n_layers())) {
    throw std::runtime_error(path + ": freeze mask length mismatch");
  }

  const auto& arrays = header.at("arrays");
  std::size_t idx = 0;
  bool ok = true;
  for_each_param_array(params, [&](int, std::vector<double>& a) {
    if (!ok) return;
    if (idx >= arrays.size() || arrays[idx].at("size").get<std::size_t>() != a.size()) {
      ok = false;
      return;
    }
    in.read(reinterpret_cast<char*>(a.data()),
            static_cast<std::streamsize>(a.size() * sizeof(double)));
    if (!in) ok = false;
    ++idx;
  });
  if (!ok || idx != arrays.size()) {
    throw std::runtime_error(path + ": parameter data does not match header");
  }
  return params;
}

std::string params_digest(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix_bytes = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const std::string header = make_header(params).dump();
  mix_bytes(header.data(), header.size());
  for_each_param_array(params, [&](int, const std::vector<double>& a) {
    mix_bytes(a.data(), a.size() * sizeof(double));
  });
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace nilmbench
