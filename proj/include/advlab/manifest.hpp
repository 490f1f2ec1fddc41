#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace advlab {

// One executed subcommand: what ran, with which config, and the digests of
// everything it produced. Replaying a manifest's commands must reproduce the
// same artifact digests; wall times are informational.
struct ManifestEntry {
  std::string command;
  std::vector<std::string> args;
  std::string config_digest;  // "-" when no config file was used
  std::vector<std::pair<std::string, std::string>> artifacts;  // path, digest
  int64_t wall_ms = 0;
};

// Appends to (or creates) the JSON manifest at `path`.
void append_manifest(const std::filesystem::path& path,
                     const ManifestEntry& entry);

}  // namespace advlab
