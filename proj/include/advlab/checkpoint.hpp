#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "advlab/tensor.hpp"

namespace advlab {

inline constexpr int kCheckpointVersion = 1;

// Versioned container: plain-text JSON header (kind, shapes, config snapshot,
// metrics) followed by raw little-endian float32 payloads, closed by a CRC32
// over everything before it. Round-trips are bit-exact on parameters.
struct Checkpoint {
  std::string component_kind;  // target | denoiser | restorer
  int version = kCheckpointVersion;
  std::vector<std::pair<std::string, Tensor>> parameters;  // ordered
  nlohmann::json config_snapshot;
  std::map<std::string, double> metrics;

  const Tensor& find(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// CRC32 of a file's bytes, hex-encoded; used for manifests and report
// metadata.
std::string file_digest_hex(const std::filesystem::path& path);

}  // namespace advlab
