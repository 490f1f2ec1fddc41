#include "advlab/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>

#include "advlab/errors.hpp"

namespace advlab {

namespace {

constexpr char kMagic[8] = {'A', 'D', 'V', 'C', 'K', 'P', 'T', '\n'};

void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

uint32_t get_u32(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) | (static_cast<uint32_t>(p[3]) << 24);
}

}  // namespace

const Tensor& Checkpoint::find(const std::string& name) const {
  for (const auto& [n, t] : parameters)
    if (n == name) return t;
  throw ValidationError("checkpoint has no parameter named " + name);
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  nlohmann::json header;
  header["kind"] = ckpt.component_kind;
  header["version"] = ckpt.version;
  header["config"] = ckpt.config_snapshot;
  header["metrics"] = ckpt.metrics;
  auto& tensors = header["tensors"] = nlohmann::json::array();
  for (const auto& [name, t] : ckpt.parameters)
    tensors.push_back({{"name", name}, {"shape", t.shape()}});

  std::string blob(kMagic, sizeof(kMagic));
  std::string hdr = header.dump();
  put_u32(blob, static_cast<uint32_t>(hdr.size()));
  blob += hdr;
  for (const auto& [name, t] : ckpt.parameters) {
    size_t bytes = static_cast<size_t>(t.size()) * sizeof(float);
    size_t off = blob.size();
    blob.resize(off + bytes);
    std::memcpy(blob.data() + off, t.data(), bytes);
  }
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(blob.data()),
            static_cast<uInt>(blob.size())));
  put_u32(blob, crc);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint: " + path.string());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));
  if (!out) throw Error("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open checkpoint: " + path.string());
  std::vector<unsigned char> blob((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (blob.size() < sizeof(kMagic) + 8)
    throw IntegrityError("checkpoint too small: " + path.string());
  if (std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw ValidationError("not a checkpoint file: " + path.string());

  size_t body = blob.size() - 4;
  uint32_t stored_crc = get_u32(blob.data() + body);
  uint32_t crc = static_cast<uint32_t>(
      crc32(0L, blob.data(), static_cast<uInt>(body)));
  if (crc != stored_crc)
    throw IntegrityError("checksum mismatch in " + path.string());

  uint32_t hdr_len = get_u32(blob.data() + sizeof(kMagic));
  size_t hdr_off = sizeof(kMagic) + 4;
  if (hdr_off + hdr_len > body)
    throw IntegrityError("truncated header in " + path.string());
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(blob.begin() + static_cast<long>(hdr_off),
                                   blob.begin() + static_cast<long>(hdr_off + hdr_len));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad checkpoint header in " + path.string() + ": " +
                          e.what());
  }

  Checkpoint ckpt;
  ckpt.version = header.at("version").get<int>();
  if (ckpt.version != kCheckpointVersion)
    throw VersionError("checkpoint " + path.string() + " has version " +
                       std::to_string(ckpt.version) + ", this build reads " +
                       std::to_string(kCheckpointVersion));
  ckpt.component_kind = header.at("kind").get<std::string>();
  ckpt.config_snapshot = header.value("config", nlohmann::json::object());
  if (header.contains("metrics"))
    ckpt.metrics = header["metrics"].get<std::map<std::string, double>>();

  size_t off = hdr_off + hdr_len;
  for (const auto& entry : header.at("tensors")) {
    Tensor t(entry.at("shape").get<std::vector<int>>());
    size_t bytes = static_cast<size_t>(t.size()) * sizeof(float);
    if (off + bytes > body)
      throw IntegrityError("payload truncated in " + path.string());
    std::memcpy(t.data(), blob.data() + off, bytes);
    off += bytes;
    ckpt.parameters.emplace_back(entry.at("name").get<std::string>(), std::move(t));
  }
  if (off != body)
    throw IntegrityError("trailing bytes in " + path.string());
  return ckpt;
}

std::string file_digest_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingInputError("cannot open file for digest: " + path.string());
  uint32_t crc = static_cast<uint32_t>(crc32(0L, Z_NULL, 0));
  char buf[65536];
  while (in) {
    in.read(buf, sizeof(buf));
    std::streamsize got = in.gcount();
    if (got > 0)
      crc = static_cast<uint32_t>(crc32(crc, reinterpret_cast<const Bytef*>(buf),
                                        static_cast<uInt>(got)));
  }
  char hex[16];
  std::snprintf(hex, sizeof(hex), "%08x", crc);
  return {hex};
}

}  // namespace advlab
