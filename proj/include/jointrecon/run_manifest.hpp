#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

namespace jointrecon {

inline constexpr int kRunManifestVersion = 1;
inline constexpr const char* kRunManifestName = "run_manifest.json";

/// SHA-1 of "blob <size>\0<bytes>", as git hashes file contents.
std::string git_blob_hash(const std::string& bytes);

/// Per-file blob hashes of every regular file under `dir` except the run
/// manifest, keyed by generic relative path.
std::map<std::string, std::string> file_hashes(const std::filesystem::path& dir);

/// SHA-1 over the sorted "<path> <blob hash>\n" lines of file_hashes(dir).
std::string content_hash(const std::filesystem::path& dir);

/// Hash of a dataset or checkpoint directory, or of a single file.
std::string artifact_hash(const std::filesystem::path& path);

struct RunManifest {
  int schema_version = kRunManifestVersion;
  std::vector<std::string> command;
  nlohmann::ordered_json config;
  std::uint64_t master_seed = 0;
  std::map<std::string, std::string> inputs;  ///< role -> artifact hash
  std::string started;                        ///< UTC, ISO 8601
  std::string finished;
  std::map<std::string, std::string> files;   ///< filled by write_run_manifest
  std::string content_hash;
};

/// Hashes the directory's current contents into `m` and writes
/// <dir>/run_manifest.json.
void write_run_manifest(RunManifest m, const std::filesystem::path& dir);

RunManifest read_run_manifest(const std::filesystem::path& dir);

/// Relative paths whose hashes no longer match (added, changed or removed
/// files). Empty when the directory verifies.
std::vector<std::string> verify_run_manifest(const std::filesystem::path& dir);

std::string utc_timestamp();

}  // namespace jointrecon
