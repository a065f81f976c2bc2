#include "jointrecon/run_manifest.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>

#include <openssl/evp.h>

#include "jointrecon/errors.hpp"
#include "jointrecon/grid_io.hpp"

namespace jointrecon {

namespace fs = std::filesystem;

namespace {

std::string sha1_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha1(), nullptr)) {
    throw std::runtime_error("sha1 digest failed");
  }
  std::string hex;
  char buf[3];
  for (unsigned int k = 0; k < len; ++k) {
    std::snprintf(buf, sizeof buf, "%02x", digest[k]);
    hex += buf;
  }
  return hex;
}

std::string digest_of(const std::map<std::string, std::string>& files) {
  std::string lines;
  for (const auto& [path, hash] : files) lines += path + " " + hash + "\n";
  return sha1_hex(lines);
}

}  // namespace

std::string git_blob_hash(const std::string& bytes) {
  std::string blob = "blob " + std::to_string(bytes.size());
  blob.push_back('\0');
  return sha1_hex(blob + bytes);
}

std::map<std::string, std::string> file_hashes(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingInputError("directory not found: " + dir.string());
  std::map<std::string, std::string> out;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto rel = fs::relative(entry.path(), dir).generic_string();
    if (rel == kRunManifestName) continue;
    out[rel] = git_blob_hash(read_file(entry.path()));
  }
  return out;
}

std::string content_hash(const fs::path& dir) { return digest_of(file_hashes(dir)); }

std::string artifact_hash(const fs::path& path) {
  if (fs::is_directory(path)) return content_hash(path);
  return git_blob_hash(read_file(path));
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(RunManifest m, const fs::path& dir) {
  m.files = file_hashes(dir);
  m.content_hash = digest_of(m.files);
  nlohmann::ordered_json j;
  j["schema_version"] = m.schema_version;
  j["command"] = m.command;
  j["config"] = m.config;
  j["master_seed"] = m.master_seed;
  j["inputs"] = m.inputs;
  j["timestamps"] = {{"started", m.started}, {"finished", m.finished}};
  j["files"] = m.files;
  j["content_hash"] = m.content_hash;
  write_file(dir / kRunManifestName, j.dump(2) + "\n");
}

RunManifest read_run_manifest(const fs::path& dir) {
  const auto path = dir / kRunManifestName;
  if (!fs::exists(path)) throw MissingInputError("run manifest not found: " + path.string());
  RunManifest m;
  try {
    const auto j = nlohmann::ordered_json::parse(read_file(path));
    m.schema_version = j.at("schema_version").get<int>();
    m.command = j.at("command").get<std::vector<std::string>>();
    m.config = j.at("config");
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
    m.started = j.at("timestamps").at("started").get<std::string>();
    m.finished = j.at("timestamps").at("finished").get<std::string>();
    m.files = j.at("files").get<std::map<std::string, std::string>>();
    m.content_hash = j.at("content_hash").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (m.schema_version != kRunManifestVersion) {
    throw FormatError(path.string() + ": unsupported schema version " + std::to_string(m.schema_version));
  }
  return m;
}

std::vector<std::string> verify_run_manifest(const fs::path& dir) {
  const auto m = read_run_manifest(dir);
  const auto now = file_hashes(dir);
  std::vector<std::string> bad;
  for (const auto& [path, hash] : m.files) {
    const auto it = now.find(path);
    if (it == now.end() || it->second != hash) bad.push_back(path);
  }
  for (const auto& [path, hash] : now) {
    if (!m.files.count(path)) bad.push_back(path);
  }
  if (bad.empty() && digest_of(m.files) != m.content_hash) bad.push_back(kRunManifestName);
  std::sort(bad.begin(), bad.end());
  return bad;
}

}  // namespace jointrecon
