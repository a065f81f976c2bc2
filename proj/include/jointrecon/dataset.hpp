#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "jointrecon/acquisition.hpp"
#include "jointrecon/phantom.hpp"

namespace jointrecon {

// Dataset layout:
//   <root>/manifest.json
//   <root>/<split>/<idx>/{pet.jrg, mri.jrg, sino.jrg, kspace.jrg,
//                         mask.json, geometry.json, acq.json}

inline constexpr int kDatasetSchemaVersion = 1;

struct DatasetConfig {
  PhantomSpec phantom;
  RadonGeometry geometry = RadonGeometry::uniform(64, 64, 60);
  AcquisitionConfig acquisition;
  std::uint64_t seed = 0;
  int n_train = 0;
  int n_test = 0;
};

void to_json(nlohmann::json& j, const DatasetConfig& c);

struct SampleRecord {
  std::string id;      ///< "<split>/<idx>", also the path relative to the root
  std::string split;
  int index = 0;
  std::string stream_label;
};

struct DatasetManifest {
  std::filesystem::path root;
  int schema_version = kDatasetSchemaVersion;
  std::uint64_t master_seed = 0;
  nlohmann::json config;
  std::vector<SampleRecord> samples;

  std::vector<SampleRecord> split(const std::string& name) const;
  std::filesystem::path sample_dir(const SampleRecord& r) const { return root / r.id; }
};

/// One acquired pair: ground truth plus its PET and MRI measurements.
struct Sample {
  std::string id;
  ImagePair truth;
  Sinogram sinogram;
  KSpaceData kspace;
  AcquisitionConfig acquisition;
};

/// Draws a mask, then simulates both measurements of `truth`. The mask,
/// PET and MRI draws use the "mask", "pet" and "mri" children of `stream`.
Sample acquire(ImagePair truth, const RadonGeometry& geom, const AcquisitionConfig& cfg,
               const RandomStream& stream);

void save_sample(const Sample& sample, const std::filesystem::path& dir);
Sample load_sample(const std::filesystem::path& dir);

/// Generates n_train + n_test samples under `root`. Each sample's stream is
/// labeled "<split>/<idx>" under the master seed. Refuses a non-empty root
/// unless `force`, in which case the root is cleared first.
DatasetManifest build_dataset(const DatasetConfig& cfg, const std::filesystem::path& root,
                              bool force = false, int jobs = 1);

DatasetManifest load_manifest(const std::filesystem::path& root);

/// True when `dir` exists and has at least one entry.
bool is_nonempty_dir(const std::filesystem::path& dir);

/// Clears `dir` if force, refuses a non-empty `dir` otherwise, then creates it.
void prepare_output_dir(const std::filesystem::path& dir, bool force);

}  // namespace jointrecon
