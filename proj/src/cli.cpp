#include "jointrecon/cli.hpp"

#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "jointrecon/baselines.hpp"
#include "jointrecon/dataset.hpp"
#include "jointrecon/grid_io.hpp"
#include "jointrecon/parallel.hpp"
#include "jointrecon/report.hpp"
#include "jointrecon/run_manifest.hpp"
#include "jointrecon/sampler.hpp"
#include "jointrecon/training.hpp"

namespace jointrecon {

namespace fs = std::filesystem;

std::optional<ExperimentPreset> find_preset(const std::string& name) {
  for (const auto& p : kPresets) {
    if (name == p.name) return p;
  }
  return std::nullopt;
}

namespace {

const std::vector<std::string> kMethods = {"joint", "single-pet", "single-mri",
                                           "mlem",  "tvcs",       "zerofill"};

nlohmann::ordered_json json_scalar(const std::string& text) {
  auto j = nlohmann::ordered_json::parse(text, nullptr, false);
  if (j.is_discarded() || j.is_object() || j.is_array() || j.is_null()) return text;
  return j;
}

// The fully resolved option values of one subcommand, command line over
// config file over defaults.
nlohmann::ordered_json resolved_options(const CLI::App& app) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const CLI::Option* opt : app.get_options()) {
    std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->get_expected_max() == 0) {
      j[name] = opt->count() > 0;
      continue;
    }
    std::vector<std::string> values = opt->results();
    if (values.empty() && !opt->get_default_str().empty()) values = {opt->get_default_str()};
    if (values.empty()) {
      j[name] = nullptr;
    } else if (opt->get_expected_max() > 1) {
      auto arr = nlohmann::ordered_json::array();
      for (const auto& v : values) arr.push_back(json_scalar(v));
      j[name] = arr;
    } else {
      j[name] = json_scalar(values.back());
    }
  }
  return j;
}

struct Acquisition {
  std::string preset;
  double accel = 0.0;
  double counts = 0.0;
  double mri_noise = -1.0;
  double center_fraction = 0.0;
  std::string sino_raster;
  bool noiseless_pet = false;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "experiment preset")
        ->check(CLI::IsMember({"fig2", "fig3", "fig4", "fig5"}));
    app->add_option("--accel", accel, "Cartesian acceleration R (overrides the preset)");
    app->add_option("--counts", counts, "expected total sinogram counts");
    app->add_option("--mri-noise", mri_noise, "k-space noise std per component");
    app->add_option("--center-fraction", center_fraction, "fully sampled centre fraction");
    app->add_option("--sino-raster", sino_raster, "sinogram raster DETECTORSxANGLES, e.g. 64x60");
    app->add_flag("--noiseless-pet", noiseless_pet, "use Poisson means instead of draws");
  }

  bool overrides() const {
    return !preset.empty() || accel > 0.0 || counts > 0.0 || mri_noise >= 0.0 ||
           center_fraction > 0.0 || !sino_raster.empty() || noiseless_pet;
  }

  void apply(AcquisitionConfig& acq, RadonGeometry& geom) const {
    if (const auto p = find_preset(preset)) {
      acq.accel = p->accel;
      acq.counts_target = p->counts_target;
      geom = RadonGeometry::uniform(geom.image_size, geom.image_size, p->n_angles);
    }
    if (accel > 0.0) acq.accel = accel;
    if (counts > 0.0) acq.counts_target = counts;
    if (mri_noise >= 0.0) acq.mri_noise_std = mri_noise;
    if (center_fraction > 0.0) acq.center_fraction = center_fraction;
    if (noiseless_pet) acq.noiseless_pet = true;
    if (!sino_raster.empty()) {
      int detectors = 0, angles = 0;
      char x = 0;
      std::istringstream in(sino_raster);
      if (!(in >> detectors >> x >> angles) || (x != 'x' && x != 'X') || !in.eof()) {
        throw ParameterError("--sino-raster must look like 64x60 (got '" + sino_raster + "')");
      }
      geom = RadonGeometry::uniform(geom.image_size, detectors, angles);
    }
    acq.validate();
    geom.validate();
  }
};

struct Common {
  std::uint64_t seed = 0;
  int jobs = 1;
  bool force = false;

  void add_to(CLI::App* app) {
    app->add_option("--seed", seed, "master seed");
    app->add_option("--jobs", jobs, "worker threads (capped by JOINTRECON_THREADS)");
    app->add_flag("--force", force, "overwrite a non-empty output directory");
    app->add_option("--config", config, "key = value file supplying any flag");
  }

  std::string config;
};

std::vector<std::string> command_echo(int argc, const char* const* argv) {
  return std::vector<std::string>(argv, argv + argc);
}

// ---------------------------------------------------------------- phantom

struct PhantomCommand {
  Common common;
  Acquisition acquisition;
  int size = 64;
  int n_train = 0;
  int n_test = 0;
  fs::path out;

  void add_to(CLI::App* app) {
    common.add_to(app);
    acquisition.add_to(app);
    app->add_option("--size", size, "image size in pixels");
    app->add_option("--train", n_train, "training pairs");
    app->add_option("--test", n_test, "held-out pairs");
    app->add_option("--out", out, "dataset directory")->required();
  }

  void run(const CLI::App& app, const std::vector<std::string>& echo, std::ostream& os) {
    const auto started = utc_timestamp();
    DatasetConfig cfg;
    cfg.phantom.size = size;
    cfg.phantom.validate();
    cfg.geometry = RadonGeometry::uniform(size, size, 60);
    acquisition.apply(cfg.acquisition, cfg.geometry);
    cfg.seed = common.seed;
    cfg.n_train = n_train;
    cfg.n_test = n_test;
    build_dataset(cfg, out, common.force, common.jobs);

    RunManifest m;
    m.command = echo;
    m.config = resolved_options(app);
    m.master_seed = common.seed;
    m.started = started;
    m.finished = utc_timestamp();
    write_run_manifest(m, out);
    os << (out / "manifest.json").string() << "\n";
  }
};

// ---------------------------------------------------------------- train

struct TrainCommand {
  Common common;
  TrainConfig cfg;
  fs::path data, out;
  std::string modality = "joint";
  bool no_augment = false;

  void add_to(CLI::App* app) {
    common.add_to(app);
    app->add_option("--data", data, "dataset directory")->required();
    app->add_option("--out", out, "checkpoint directory")->required();
    app->add_option("--epochs", cfg.epochs, "training epochs");
    app->add_option("--lr", cfg.learning_rate, "learning rate");
    app->add_option("--momentum", cfg.momentum, "SGD momentum");
    app->add_option("--batch", cfg.batch_size, "batch size");
    app->add_option("--grad-clip", cfg.grad_clip, "global gradient-norm clip, 0 = off");
    app->add_flag("--no-augment", no_augment, "disable flip augmentation");
    app->add_option("--modality", modality, "prior channels")
        ->check(CLI::IsMember({"joint", "pet", "mri"}));
    app->add_option("--sigma-min", cfg.schedule.sigma_min, "smallest noise level");
    app->add_option("--sigma-max", cfg.schedule.sigma_max, "largest noise level");
    app->add_option("--levels", cfg.schedule.n_steps, "number of noise levels N");
  }

  void run(const CLI::App& app, const std::vector<std::string>& echo, std::ostream& os) {
    const auto started = utc_timestamp();
    cfg.modality = parse_modality(modality);
    cfg.augment = !no_augment;
    cfg.seed = common.seed;
    cfg.jobs = common.jobs;
    cfg.validate();
    const auto manifest = load_manifest(data);
    prepare_output_dir(out, common.force);

    const auto result = train_score(manifest, cfg, [&](const EpochLog& e) {
      os << "epoch " << e.epoch << "  train " << e.train_loss << "  heldout " << e.heldout_loss
         << "\n";
    });
    save_checkpoint(result.params, out);
    write_file(out / "loss.csv", training_log_csv(result.log));

    RunManifest m;
    m.command = echo;
    m.config = resolved_options(app);
    m.config["train_config"] = nlohmann::json(cfg);
    m.master_seed = common.seed;
    m.inputs["dataset"] = content_hash(data);
    m.started = started;
    m.finished = utc_timestamp();
    write_run_manifest(m, out);
    os << "checkpoint written to " << out.string() << "\n";
  }
};

// ---------------------------------------------------------------- reconstruct

struct SampleJob {
  std::string id;
  fs::path dir;
  std::string stream_label;
};

// Sampler defaults for network priors on desk-scale 64x64 data.
SamplerConfig reconstruct_defaults() {
  SamplerConfig c;
  c.step_scale = 10.0;
  c.dc_weight_mri = 1e4;
  return c;
}

struct ReconstructCommand {
  Common common;
  Acquisition acquisition;
  SamplerConfig sampler = reconstruct_defaults();
  MlemConfig mlem_cfg;
  TvConfig tv_cfg;
  fs::path data, sample_dir, out, checkpoint, pet_checkpoint, mri_checkpoint, oracle_gm;
  std::string split = "test";
  int limit = 0;
  int average = 1;
  std::vector<std::string> methods;
  bool no_anneal = false;
  bool literal = false;
  std::string pet_step = "em";
  CLI::Option* sigma_options[3] = {nullptr, nullptr, nullptr};
  CLI::Option* lambda_pet_option = nullptr;

  void add_to(CLI::App* app) {
    common.add_to(app);
    acquisition.add_to(app);
    auto* src = app->add_option("--data", data, "dataset directory");
    app->add_option("--sample", sample_dir, "a single sample directory")->excludes(src);
    app->add_option("--split", split, "dataset split to reconstruct");
    app->add_option("--limit", limit, "first N samples of the split, 0 = all");
    app->add_option("--method", methods, "one or more of " + CLI::detail::join(kMethods, ", "))
        ->required()
        ->delimiter(',')
        ->check(CLI::IsMember(kMethods));
    app->add_option("--out", out, "result directory")->required();
    app->add_option("--checkpoint", checkpoint, "joint score network");
    app->add_option("--pet-checkpoint", pet_checkpoint, "PET-only score network");
    app->add_option("--mri-checkpoint", mri_checkpoint, "MRI-only score network");
    app->add_option("--oracle-gm", oracle_gm, "Gaussian-mixture prior (JSON) instead of a network");
    app->add_option("--average", average, "average this many sampler runs per sample");

    sigma_options[0] = app->add_option("--sigma-min", sampler.schedule.sigma_min, "smallest noise level");
    sigma_options[1] = app->add_option("--sigma-max", sampler.schedule.sigma_max, "largest noise level");
    sigma_options[2] = app->add_option("--levels", sampler.schedule.n_steps, "number of noise levels N");
    app->add_option("--steps-per-level", sampler.steps_per_level, "Langevin steps per level");
    app->add_option("--step-scale", sampler.step_scale, "step size at sigma_max");
    lambda_pet_option = app->add_option("--lambda-pet", sampler.dc_weight_pet,
                                        "PET data weight (under --pet-step em: the EM relaxation, 0.05 unless given)");
    app->add_option("--pet-step", pet_step, "PET data step: em or gradient")
        ->check(CLI::IsMember({"em", "gradient"}));
    app->add_option("--lambda-mri", sampler.dc_weight_mri, "MRI data weight");
    app->add_option("--pet-floor", sampler.pet_floor, "floor on expected counts");
    app->add_flag("--no-anneal", no_anneal, "keep data weights constant across levels");
    app->add_flag("--literal", literal, "unit-coefficient four-term update");
    app->add_option("--mlem-iters", mlem_cfg.iterations, "MLEM iterations");
    app->add_option("--tv-weight", tv_cfg.tv_weight, "TV weight for tvcs");
    app->add_option("--tv-iters", tv_cfg.iterations, "iterations for tvcs");
  }

  bool uses(const std::string& method) const {
    return std::find(methods.begin(), methods.end(), method) != methods.end();
  }

  std::unique_ptr<ScoreSource> score_source(Modality modality, const fs::path& net_path,
                                            const char* flag,
                                            std::map<std::string, std::string>& inputs) const {
    if (!net_path.empty()) {
      auto params = load_checkpoint(net_path);
      if (params.modality != modality) {
        throw ParameterError(std::string(flag) + " holds a " + to_string(params.modality) +
                             " network, expected " + to_string(modality));
      }
      inputs[std::string(flag).substr(2)] = artifact_hash(net_path);
      return std::make_unique<NetworkScore>(std::move(params));
    }
    if (!oracle_gm.empty()) {
      if (!fs::exists(oracle_gm)) throw MissingInputError("oracle mixture not found: " + oracle_gm.string());
      GaussianMixture gm;
      try {
        gm = nlohmann::json::parse(read_file(oracle_gm)).get<GaussianMixture>();
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(oracle_gm.string() + ": " + e.what());
      }
      inputs["oracle-gm"] = artifact_hash(oracle_gm);
      return std::make_unique<MixtureScore>(std::move(gm), modality);
    }
    throw MissingInputError(to_string(modality) + " prior needed: pass " + flag + " or --oracle-gm");
  }

  // The sampler follows the network's training noise range unless the
  // command line says otherwise.
  SamplerConfig sampler_for(const ScoreSource& source) const {
    SamplerConfig c = sampler;
    c.anneal_likelihood = !no_anneal;
    c.literal_mode = literal;
    c.pet_step = parse_pet_step(pet_step);
    if (c.pet_step == PetStep::em && lambda_pet_option->count() == 0) c.dc_weight_pet = kEmRelaxation;
    if (const auto* net = dynamic_cast<const NetworkScore*>(&source)) {
      const auto& s = net->params().schedule;
      if (sigma_options[0]->count() == 0) c.schedule.sigma_min = s.sigma_min;
      if (sigma_options[1]->count() == 0) c.schedule.sigma_max = s.sigma_max;
      if (sigma_options[2]->count() == 0) c.schedule.n_steps = s.n_steps;
    }
    c.validate();
    return c;
  }

  void run(const CLI::App& app, const std::vector<std::string>& echo, std::ostream& os) {
    const auto started = utc_timestamp();
    if (average < 1) throw ParameterError("--average must be >= 1");
    mlem_cfg.validate();
    tv_cfg.validate();

    std::vector<SampleJob> jobs;
    std::uint64_t master_seed = common.seed;
    std::map<std::string, std::string> inputs;
    if (!data.empty()) {
      const auto manifest = load_manifest(data);
      master_seed = manifest.master_seed;
      for (const auto& r : manifest.split(split)) {
        jobs.push_back({r.id, manifest.sample_dir(r), r.stream_label});
      }
      if (limit > 0 && static_cast<int>(jobs.size()) > limit) jobs.resize(static_cast<std::size_t>(limit));
      if (jobs.empty()) throw MissingInputError("no samples in split '" + split + "' of " + data.string());
      inputs["dataset"] = content_hash(data);
    } else if (!sample_dir.empty()) {
      if (!fs::is_directory(sample_dir)) throw MissingInputError("sample directory not found: " + sample_dir.string());
      const auto id = sample_dir.filename().string();
      jobs.push_back({id, sample_dir, id});
      inputs["sample"] = content_hash(sample_dir);
    } else {
      throw ParameterError("reconstruct needs --data or --sample");
    }

    std::unique_ptr<ScoreSource> joint, pet, mri;
    if (uses("joint")) joint = score_source(Modality::joint, checkpoint, "--checkpoint", inputs);
    if (uses("single-pet")) pet = score_source(Modality::pet, pet_checkpoint, "--pet-checkpoint", inputs);
    if (uses("single-mri")) mri = score_source(Modality::mri, mri_checkpoint, "--mri-checkpoint", inputs);
    prepare_output_dir(out, common.force);

    parallel_for(jobs.size(), common.jobs, [&](std::size_t k) { run_sample(jobs[k], master_seed, joint.get(), pet.get(), mri.get()); });

    RunManifest m;
    m.command = echo;
    m.config = resolved_options(app);
    // The sampler settings actually used, after checkpoint schedules and
    // pet-step defaults are applied.
    for (const auto& [name, source] : {std::pair{"joint", joint.get()}, std::pair{"single-pet", pet.get()},
                                       std::pair{"single-mri", mri.get()}}) {
      if (source) m.config["sampler"][name] = nlohmann::json(sampler_for(*source));
    }
    m.master_seed = master_seed;
    m.inputs = inputs;
    m.started = started;
    m.finished = utc_timestamp();
    write_run_manifest(m, out);
    os << "reconstructed " << jobs.size() << " sample(s) with " << CLI::detail::join(methods, ",")
       << " into " << out.string() << "\n";
  }

  SamplerResult sample(const ScoreSource& source, const Sample& s, Modality modality,
                       const std::string& label) const {
    SamplerConfig c = sampler_for(source);
    SamplerResult mean;
    for (int k = 0; k < average; ++k) {
      c.seed = fnv1a64(std::to_string(common.seed) + "/" + label + "/" + std::to_string(k));
      SamplerResult r = modality == Modality::joint
                            ? reconstruct_joint(s.sinogram, s.kspace, source, c)
                            : reconstruct_single(modality,
                                                 modality == Modality::pet
                                                     ? Measurements{s.sinogram, std::nullopt}
                                                     : Measurements{std::nullopt, s.kspace},
                                                 source, c);
      if (k == 0) {
        mean = std::move(r);
      } else {
        mean.image.pet += r.image.pet;
        mean.image.mri += r.image.mri;
      }
    }
    mean.image.pet /= static_cast<double>(average);
    mean.image.mri /= static_cast<double>(average);
    return mean;
  }

  void run_sample(const SampleJob& job, std::uint64_t master_seed, const ScoreSource* joint,
                  const ScoreSource* pet, const ScoreSource* mri) const {
    Sample s = load_sample(job.dir);
    if (acquisition.overrides()) {
      AcquisitionConfig acq = s.acquisition;
      RadonGeometry geom = s.sinogram.geometry;
      acquisition.apply(acq, geom);
      const RandomStream stream = RandomStream(master_seed, job.stream_label).derive("reacquire");
      s = acquire(std::move(s.truth), geom, acq, stream);
    }
    const fs::path dir = out / job.id;
    save_grid(s.truth.pet, dir / "truth_pet.jrg");
    save_grid(s.truth.mri, dir / "truth_mri.jrg");
    nlohmann::ordered_json measured;
    measured["acquisition"] = nlohmann::json(s.acquisition);
    measured["count_scale"] = s.sinogram.scale;
    measured["geometry"] = nlohmann::json(s.sinogram.geometry);
    measured["mask"] = nlohmann::json(s.kspace.mask);
    write_file(dir / "measurement.json", measured.dump(2) + "\n");

    for (const auto& method : methods) {
      const std::string label = job.stream_label + "/" + method;
      if (method == "joint") {
        const auto r = sample(*joint, s, Modality::joint, label);
        save_grid(r.image.pet, dir / "joint_pet.jrg");
        save_grid(r.image.mri, dir / "joint_mri.jrg");
        write_file(dir / "joint_trace.csv", trace_csv(r.trace));
      } else if (method == "single-pet") {
        const auto r = sample(*pet, s, Modality::pet, label);
        save_grid(r.image.pet, dir / "single-pet_pet.jrg");
        write_file(dir / "single-pet_trace.csv", trace_csv(r.trace));
      } else if (method == "single-mri") {
        const auto r = sample(*mri, s, Modality::mri, label);
        save_grid(r.image.mri, dir / "single-mri_mri.jrg");
        write_file(dir / "single-mri_trace.csv", trace_csv(r.trace));
      } else if (method == "mlem") {
        const auto r = jointrecon::mlem(s.sinogram, mlem_cfg);
        save_grid(r.image, dir / "mlem_pet.jrg");
        write_file(dir / "mlem_objective.csv", objective_csv(r.objective));
      } else if (method == "tvcs") {
        const auto r = tv_cs(s.kspace, tv_cfg);
        save_grid(r.image, dir / "tvcs_mri.jrg");
        write_file(dir / "tvcs_objective.csv", objective_csv(r.objective));
      } else {
        save_grid(zero_filled(s.kspace), dir / "zerofill_mri.jrg");
      }
    }
  }
};

// ---------------------------------------------------------------- evaluate

struct EvaluateCommand {
  std::vector<fs::path> runs;
  fs::path out;
  bool force = false;

  void add_to(CLI::App* app) {
    app->add_option("runs", runs, "run directories to compare")->required();
    app->add_option("--out", out, "report directory")->required();
    app->add_flag("--force", force, "overwrite a non-empty output directory");
    app->add_option("--config", config, "key = value file supplying any flag");
  }

  std::string config;

  void run(const CLI::App& app, const std::vector<std::string>& echo, std::ostream& os) {
    const auto started = utc_timestamp();
    for (const auto& r : runs) {
      if (!fs::is_directory(r)) throw MissingInputError("run directory not found: " + r.string());
    }
    // Scores are computed before touching the output so a failed report
    // leaves an existing one in place.
    collect_metrics(runs);
    prepare_output_dir(out, force);
    const auto files = make_report(runs, out);
    os << summary_table(files.summary);

    RunManifest m;
    m.command = echo;
    m.config = resolved_options(app);
    for (std::size_t k = 0; k < runs.size(); ++k) {
      m.inputs["run" + std::to_string(k)] = content_hash(runs[k]);
    }
    m.started = started;
    m.finished = utc_timestamp();
    write_run_manifest(m, out);
  }
};

// ---------------------------------------------------------------- verify

struct VerifyCommand {
  std::vector<fs::path> dirs;

  void add_to(CLI::App* app) { app->add_option("dirs", dirs, "directories with a run manifest")->required(); }

  int run(std::ostream& os) const {
    int status = kExitOk;
    for (const auto& d : dirs) {
      const auto bad = verify_run_manifest(d);
      if (bad.empty()) {
        os << d.string() << ": ok " << read_run_manifest(d).content_hash << "\n";
        continue;
      }
      status = kExitFailure;
      os << d.string() << ": " << bad.size() << " mismatched file(s)\n";
      for (const auto& b : bad) os << "  " << b << "\n";
    }
    return status;
  }
};

bool given(const std::vector<std::string>& args, const std::string& flag) {
  for (const auto& a : args) {
    if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
  }
  return false;
}

// Appends the entries of the subcommand's --config file as command-line
// tokens, skipping any flag the command line already sets. Keys may sit at
// top level or under a [<subcommand>] section.
std::vector<std::string> expand_config(const CLI::App& app, std::vector<std::string> args) {
  if (args.empty()) return args;
  const CLI::App* sub = nullptr;
  for (const CLI::App* s : app.get_subcommands({})) {
    if (s->get_name() == args.front()) sub = s;
  }
  if (sub == nullptr) return args;

  std::string file;
  for (std::size_t k = 1; k < args.size(); ++k) {
    if (args[k] == "--config" && k + 1 < args.size()) file = args[k + 1];
    if (args[k].rfind("--config=", 0) == 0) file = args[k].substr(9);
  }
  if (file.empty()) return args;
  if (!fs::exists(file)) throw MissingInputError("config file not found: " + file);

  std::vector<std::string> extra;
  for (const auto& item : CLI::ConfigTOML().from_file(file)) {
    if (!(item.parents.empty() || (item.parents.size() == 1 && item.parents[0] == sub->get_name()))) {
      continue;
    }
    const CLI::Option* opt = sub->get_option_no_throw("--" + item.name);
    if (opt == nullptr) opt = sub->get_option_no_throw(item.name);
    if (opt == nullptr) throw ParameterError(file + ": unknown key '" + item.name + "'");
    if (opt->get_single_name() == "config") continue;
    if (opt->get_positional()) {
      // Positional values from the file add to those on the command line.
      extra.insert(extra.end(), item.inputs.begin(), item.inputs.end());
      continue;
    }
    const std::string flag = "--" + opt->get_single_name();
    if (given(args, flag)) continue;
    if (opt->get_expected_max() == 0) {
      if (item.inputs.size() == 1 && (item.inputs[0] == "true" || item.inputs[0] == "1")) {
        extra.push_back(flag);
      }
      continue;
    }
    for (const auto& v : item.inputs) {
      extra.push_back(flag);
      extra.push_back(v);
    }
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Joint PET-MRI reconstruction with a learned joint score prior", "jointrecon"};
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);

  PhantomCommand phantom;
  TrainCommand train;
  ReconstructCommand reconstruct;
  EvaluateCommand evaluate;
  VerifyCommand verify;
  auto* phantom_app = app.add_subcommand("phantom", "generate a paired phantom dataset");
  auto* train_app = app.add_subcommand("train", "train a score network");
  auto* reconstruct_app = app.add_subcommand("reconstruct", "reconstruct samples with one or more methods");
  auto* evaluate_app = app.add_subcommand("evaluate", "score runs and write the report");
  auto* verify_app = app.add_subcommand("verify", "check run directories against their manifests");
  phantom.add_to(phantom_app);
  train.add_to(train_app);
  reconstruct.add_to(reconstruct_app);
  evaluate.add_to(evaluate_app);
  verify.add_to(verify_app);

  try {
    auto args = expand_config(app, std::vector<std::string>(argv + std::min(argc, 1), argv + argc));
    std::reverse(args.begin(), args.end());
    app.parse(std::move(args));
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const CLI::ParseError& e) {
    std::ostringstream help, error;
    const int code = app.exit(e, help, error);
    out << help.str();
    err << error.str();
    return code == 0 ? kExitOk : kExitUsage;
  }

  const auto echo = command_echo(argc, argv);
  try {
    if (phantom_app->parsed()) phantom.run(*phantom_app, echo, out);
    if (train_app->parsed()) train.run(*train_app, echo, out);
    if (reconstruct_app->parsed()) reconstruct.run(*reconstruct_app, echo, out);
    if (evaluate_app->parsed()) evaluate.run(*evaluate_app, echo, out);
    if (verify_app->parsed()) return verify.run(out);
  } catch (const DivergenceError& e) {
    err << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const MissingInputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const FormatError& e) {
    err << "error: " << e.what() << "\n";
    return kExitMissingInput;
  } catch (const ParameterError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DimensionError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const GeometryError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const SimulationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ReportError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitOk;
}

}  // namespace jointrecon
