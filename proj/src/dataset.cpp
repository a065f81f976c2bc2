#include "jointrecon/dataset.hpp"

#include <cstdio>

#include "jointrecon/grid_io.hpp"
#include "jointrecon/parallel.hpp"

namespace jointrecon {

namespace fs = std::filesystem;

namespace {

std::string sample_id(const std::string& split, int index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d", index);
  return split + "/" + buf;
}

nlohmann::json read_json(const fs::path& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  write_file(path, j.dump(2) + "\n");
}

}  // namespace

void to_json(nlohmann::json& j, const DatasetConfig& c) {
  j = nlohmann::json{{"phantom",
                      {{"size", c.phantom.size},
                       {"min_ellipses", c.phantom.min_ellipses},
                       {"max_ellipses", c.phantom.max_ellipses},
                       {"min_lesions", c.phantom.min_lesions},
                       {"max_lesions", c.phantom.max_lesions}}},
                     {"geometry", c.geometry},
                     {"acquisition", c.acquisition},
                     {"n_train", c.n_train},
                     {"n_test", c.n_test}};
}

std::vector<SampleRecord> DatasetManifest::split(const std::string& name) const {
  std::vector<SampleRecord> out;
  for (const auto& r : samples) {
    if (r.split == name) out.push_back(r);
  }
  return out;
}

Sample acquire(ImagePair truth, const RadonGeometry& geom, const AcquisitionConfig& cfg,
               const RandomStream& stream) {
  auto mask_stream = stream.derive("mask");
  auto pet_stream = stream.derive("pet");
  auto mri_stream = stream.derive("mri");
  const auto width = static_cast<int>(truth.width());
  const auto mask = make_cartesian_mask(width, cfg.accel, cfg.center_fraction, mask_stream,
                                        static_cast<int>(truth.height()));
  Sample s;
  s.sinogram = simulate_pet(truth.pet, geom, cfg, pet_stream);
  s.kspace = simulate_mri(truth.mri, mask, cfg, mri_stream);
  s.acquisition = cfg;
  s.truth = std::move(truth);
  return s;
}

void save_sample(const Sample& sample, const fs::path& dir) {
  fs::create_directories(dir);
  save_grid(sample.truth.pet, dir / "pet.jrg");
  save_grid(sample.truth.mri, dir / "mri.jrg");
  save_grid(sample.sinogram.data, dir / "sino.jrg");
  save_grid(sample.kspace.data, dir / "kspace.jrg");
  write_json(dir / "mask.json", nlohmann::json(sample.kspace.mask));
  write_json(dir / "geometry.json", nlohmann::json(sample.sinogram.geometry));
  nlohmann::json acq = sample.acquisition;
  acq["count_scale"] = sample.sinogram.scale;
  write_json(dir / "acq.json", acq);
}

Sample load_sample(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw MissingInputError("sample directory not found: " + dir.string());
  Sample s;
  s.id = dir.parent_path().filename().string() + "/" + dir.filename().string();
  s.truth.pet = load_real_grid(dir / "pet.jrg");
  s.truth.mri = load_complex_grid(dir / "mri.jrg");
  try {
    s.sinogram.geometry = read_json(dir / "geometry.json").get<RadonGeometry>();
    s.kspace.mask = read_json(dir / "mask.json").get<SamplingMask>();
    const auto acq = read_json(dir / "acq.json");
    s.acquisition = acq.get<AcquisitionConfig>();
    s.sinogram.scale = acq.at("count_scale").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(dir.string() + ": " + e.what());
  }
  s.sinogram.data = load_real_grid(dir / "sino.jrg");
  s.kspace.data = load_complex_grid(dir / "kspace.jrg");
  if (s.sinogram.data.rows() != s.sinogram.geometry.n_detectors ||
      s.sinogram.data.cols() != s.sinogram.geometry.n_angles()) {
    throw FormatError(dir.string() + ": sinogram raster does not match geometry.json");
  }
  if (s.kspace.data.rows() != s.kspace.mask.height || s.kspace.data.cols() != s.kspace.mask.width) {
    throw FormatError(dir.string() + ": k-space raster does not match mask.json");
  }
  validate(s.truth);
  return s;
}

bool is_nonempty_dir(const fs::path& dir) {
  return fs::is_directory(dir) && fs::directory_iterator(dir) != fs::directory_iterator();
}

void prepare_output_dir(const fs::path& dir, bool force) {
  if (fs::exists(dir) && !fs::is_directory(dir)) {
    throw ParameterError(dir.string() + " exists and is not a directory");
  }
  if (is_nonempty_dir(dir)) {
    if (!force) throw ParameterError(dir.string() + " is not empty (use --force to overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

DatasetManifest build_dataset(const DatasetConfig& cfg, const fs::path& root, bool force,
                              int jobs) {
  cfg.phantom.validate();
  cfg.geometry.validate();
  cfg.acquisition.validate();
  if (cfg.n_train < 0 || cfg.n_test < 0) throw ParameterError("dataset: sample counts must be >= 0");
  if (cfg.geometry.image_size != cfg.phantom.size) {
    throw ParameterError("dataset: geometry image_size must equal phantom size");
  }
  prepare_output_dir(root, force);

  DatasetManifest manifest;
  manifest.root = root;
  manifest.master_seed = cfg.seed;
  manifest.config = cfg;
  for (const auto& [split, count] : {std::pair{std::string("train"), cfg.n_train},
                                     std::pair{std::string("test"), cfg.n_test}}) {
    for (int i = 0; i < count; ++i) {
      const auto id = sample_id(split, i);
      manifest.samples.push_back({id, split, i, id});
    }
  }

  parallel_for(manifest.samples.size(), jobs, [&](std::size_t k) {
    const auto& rec = manifest.samples[k];
    const RandomStream stream(cfg.seed, rec.stream_label);
    auto phantom_stream = stream.derive("phantom");
    Sample s = acquire(make_phantom_pair(cfg.phantom, phantom_stream), cfg.geometry,
                       cfg.acquisition, stream);
    s.id = rec.id;
    save_sample(s, root / rec.id);
  });

  nlohmann::ordered_json j;
  j["schema_version"] = manifest.schema_version;
  j["master_seed"] = manifest.master_seed;
  j["config"] = manifest.config;
  j["samples"] = nlohmann::json::array();
  for (const auto& r : manifest.samples) {
    j["samples"].push_back({{"id", r.id},
                            {"split", r.split},
                            {"index", r.index},
                            {"stream_label", r.stream_label}});
  }
  write_file(root / "manifest.json", j.dump(2) + "\n");
  return manifest;
}

DatasetManifest load_manifest(const fs::path& root) {
  const auto path = root / "manifest.json";
  if (!fs::exists(path)) throw MissingInputError("dataset manifest not found: " + path.string());
  const auto j = read_json(path);
  DatasetManifest m;
  m.root = root;
  try {
    m.schema_version = j.at("schema_version").get<int>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    m.config = j.at("config");
    for (const auto& s : j.at("samples")) {
      m.samples.push_back({s.at("id").get<std::string>(), s.at("split").get<std::string>(),
                           s.at("index").get<int>(), s.at("stream_label").get<std::string>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  if (m.schema_version != kDatasetSchemaVersion) {
    throw FormatError(path.string() + ": unsupported schema version " +
                      std::to_string(m.schema_version));
  }
  return m;
}

}  // namespace jointrecon
