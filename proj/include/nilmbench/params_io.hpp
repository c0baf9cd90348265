#pragma once

#include <cstdint>
#include <string>

#include "nilmbench/model.hpp"

namespace nilmbench {

// Versioned binary container: 8-byte magic, u64 header length, JSON header
// (arch + freeze mask + array manifest), then the parameter arrays as raw
// little-endian doubles in canonical order. Round-trips are lossless and
// byte-deterministic for identical parameters.
void save_params(const std::string& path, const ModelParams& params);
ModelParams load_params(const std::string& path);

// FNV-1a over the canonical parameter bytes plus the header; hex string.
std::string params_digest(const ModelParams& params);

}  // namespace nilmbench
