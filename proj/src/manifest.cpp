#include "advlab/manifest.hpp"

#include <fstream>

#include "json.hpp"

#include "advlab/errors.hpp"

namespace advlab {

void append_manifest(const std::filesystem::path& path,
                     const ManifestEntry& entry) {
  nlohmann::json doc;
  {
    std::ifstream in(path);
    if (in) {
      try {
        in >> doc;
      } catch (const nlohmann::json::exception&) {
        doc = nlohmann::json::object();
      }
    }
  }
  if (!doc.contains("entries")) doc["entries"] = nlohmann::json::array();

  nlohmann::json e;
  e["command"] = entry.command;
  e["args"] = entry.args;
  e["config_digest"] = entry.config_digest;
  auto& artifacts = e["artifacts"] = nlohmann::json::array();
  for (const auto& [p, digest] : entry.artifacts)
    artifacts.push_back({{"path", p}, {"digest", digest}});
  e["wall_ms"] = entry.wall_ms;
  doc["entries"].push_back(std::move(e));

  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write manifest: " + path.string());
  out << doc.dump(2) << "\n";
}

}  // namespace advlab
