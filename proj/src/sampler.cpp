#include "jointrecon/sampler.hpp"

#include <cmath>
#include <sstream>

namespace jointrecon {

namespace {

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

void check_image(const ImagePair& x, const Measurements& data) {
  if (data.pet) {
    const int m = data.pet->geometry.image_size;
    if (x.height() != m || x.width() != m) {
      throw DimensionError("sampler: image is " + std::to_string(x.height()) + "x" +
                           std::to_string(x.width()) + " but the sinogram geometry expects " +
                           std::to_string(m) + "x" + std::to_string(m));
    }
  }
  if (data.mri && (x.height() != data.mri->mask.height || x.width() != data.mri->mask.width)) {
    throw DimensionError("sampler: image shape does not match the k-space mask");
  }
}

RealGrid sensitivity(const Sinogram& f) {
  Sinogram ones = f;
  ones.data.setOnes();
  return (f.scale * radon_adjoint(ones)).cwiseMax(1e-12);
}

double anneal(double curvature, double sigma, const NoiseSchedule& s) {
  return (1.0 + curvature * s.sigma_min * s.sigma_min) / (1.0 + curvature * sigma * sigma);
}

}  // namespace

namespace {

void fill_gaussian(ImagePair& z, Modality modality, RandomStream& stream) {
  if (covers_pet(modality)) {
    for (Eigen::Index k = 0; k < z.pet.size(); ++k) z.pet.data()[k] = stream.gaussian();
  } else {
    z.pet.setZero();
  }
  if (covers_mri(modality)) {
    for (Eigen::Index k = 0; k < z.mri.size(); ++k) {
      const double re = stream.gaussian();
      z.mri.data()[k] = Complex(re, stream.gaussian());
    }
  } else {
    z.mri.setZero();
  }
}

}  // namespace

void StreamNoise::fill(ImagePair& z, Modality modality) { fill_gaussian(z, modality, stream_); }

ImagePair forward_diffuse(const ImagePair& x, int level, const NoiseSchedule& s, NoiseSource& noise) {
  const double sigma = sigma_at(level, s);
  ImagePair z = ImagePair::zeros(x.height(), x.width());
  noise.fill(z, Modality::joint);
  return ImagePair{x.pet + sigma * z.pet, x.mri + sigma * z.mri};
}

ImagePair forward_diffuse(const ImagePair& x, int level, const NoiseSchedule& s, RandomStream& stream) {
  const double sigma = sigma_at(level, s);
  ImagePair z = ImagePair::zeros(x.height(), x.width());
  fill_gaussian(z, Modality::joint, stream);
  return ImagePair{x.pet + sigma * z.pet, x.mri + sigma * z.mri};
}

double poisson_objective(const RealGrid& u, const Sinogram& f, double floor) {
  const RealGrid lambda = expected_counts(u, f);
  require_same_shape(lambda, f.data, "poisson_objective");
  return (lambda.array() - f.data.array() * lambda.array().max(floor).log()).sum();
}

RealGrid poisson_dc_gradient(const RealGrid& u, const Sinogram& f, double floor) {
  const RealGrid lambda = expected_counts(u, f);
  require_same_shape(lambda, f.data, "poisson_dc_gradient");
  Sinogram ratio = f;
  ratio.data = 1.0 - f.data.array() / lambda.array().max(floor);
  return f.scale * radon_adjoint(ratio);
}

double gaussian_objective(const ComplexGrid& v, const KSpaceData& g) {
  const auto fv = fourier_forward(v, g.mask);
  require_same_shape(fv.data, g.data, "gaussian_objective");
  return 0.5 * (fv.data - g.data).squaredNorm();
}

ComplexGrid gaussian_dc_gradient(const ComplexGrid& v, const KSpaceData& g) {
  auto r = fourier_forward(v, g.mask);
  require_same_shape(r.data, g.data, "gaussian_dc_gradient");
  r.data -= g.data;
  return fourier_adjoint(r);
}

double poisson_curvature(const Sinogram& f, int iterations) {
  const int m = f.geometry.image_size;
  RealGrid weight = RealGrid::Zero(f.data.rows(), f.data.cols());
  for (Eigen::Index k = 0; k < weight.size(); ++k) {
    const double counts = f.data.data()[k];
    if (counts > 0.0) weight.data()[k] = f.scale * f.scale / counts;
  }
  RealGrid x = RealGrid::Ones(m, m) / m;
  double eigen = 0.0;
  for (int it = 0; it < iterations; ++it) {
    Sinogram ax = radon_forward(x, f.geometry);
    ax.data = ax.data.cwiseProduct(weight);
    const RealGrid y = radon_adjoint(ax);
    eigen = y.norm();
    if (!(eigen > 0.0)) return 0.0;
    x = y / eigen;
  }
  return eigen;
}

PetStep parse_pet_step(const std::string& name) {
  if (name == "gradient") return PetStep::gradient;
  if (name == "em") return PetStep::em;
  throw ParameterError("sampler: unknown PET step '" + name + "' (gradient or em)");
}

void SamplerConfig::validate() const {
  schedule.validate();
  if (steps_per_level < 1) throw ParameterError("sampler: steps_per_level must be >= 1");
  if (!(step_scale > 0.0)) throw ParameterError("sampler: step_scale must be > 0");
  if (!(dc_weight_pet >= 0.0) || !(dc_weight_mri >= 0.0)) {
    throw ParameterError("sampler: data-consistency weights must be >= 0");
  }
  if (!(pet_floor > 0.0)) throw ParameterError("sampler: pet_floor must be > 0");
  if (pet_step == PetStep::em && dc_weight_pet > 1.0) {
    throw ParameterError("sampler: the EM-step PET weight is a relaxation and must be <= 1");
  }
}

void to_json(nlohmann::json& j, const SamplerConfig& c) {
  j = nlohmann::json{{"schedule", c.schedule},
                     {"steps_per_level", c.steps_per_level},
                     {"step_scale", c.step_scale},
                     {"dc_weight_pet", c.dc_weight_pet},
                     {"dc_weight_mri", c.dc_weight_mri},
                     {"anneal_likelihood", c.anneal_likelihood},
                     {"literal_mode", c.literal_mode},
                     {"pet_floor", c.pet_floor},
                     {"pet_step", c.pet_step == PetStep::em ? "em" : "gradient"},
                     {"seed", c.seed}};
}

void from_json(const nlohmann::json& j, SamplerConfig& c) {
  j.at("schedule").get_to(c.schedule);
  j.at("steps_per_level").get_to(c.steps_per_level);
  j.at("step_scale").get_to(c.step_scale);
  j.at("dc_weight_pet").get_to(c.dc_weight_pet);
  j.at("dc_weight_mri").get_to(c.dc_weight_mri);
  j.at("anneal_likelihood").get_to(c.anneal_likelihood);
  j.at("literal_mode").get_to(c.literal_mode);
  j.at("pet_floor").get_to(c.pet_floor);
  c.pet_step = parse_pet_step(j.value("pet_step", std::string("gradient")));
  j.at("seed").get_to(c.seed);
  c.validate();
}

void reverse_step(SamplerState& state, const Measurements& data, const ScoreSource& source,
                  const SamplerConfig& cfg, NoiseSource& noise) {
  cfg.validate();
  if (state.level < 1 || state.level > cfg.schedule.n_steps) {
    throw ParameterError("reverse_step: state level " + std::to_string(state.level) +
                         " outside [1, " + std::to_string(cfg.schedule.n_steps) + "]");
  }
  check_image(state.x, data);
  const Modality modality = source.modality();
  const bool do_pet = covers_pet(modality);
  const bool do_mri = covers_mri(modality);
  const bool pet_data = do_pet && data.pet.has_value();
  const bool mri_data = do_mri && data.mri.has_value();

  const int level = state.level - 1;
  const double sigma = sigma_at(level, cfg.schedule);
  if (state.pet_curvature < 0.0) {
    state.pet_curvature = pet_data ? cfg.dc_weight_pet * poisson_curvature(*data.pet) : 0.0;
  }
  if (state.mri_curvature < 0.0) state.mri_curvature = mri_data ? cfg.dc_weight_mri : 0.0;

  double alpha = 1.0, noise_scale = 1.0, wp = 1.0, wm = 1.0;
  if (!cfg.literal_mode) {
    const double r = sigma / cfg.schedule.sigma_max;
    alpha = cfg.step_scale * r * r;
    noise_scale = std::sqrt(2.0 * alpha);
    wp = cfg.dc_weight_pet;
    wm = cfg.dc_weight_mri;
    if (cfg.anneal_likelihood) {
      wp *= anneal(state.pet_curvature, sigma, cfg.schedule);
      wm *= anneal(state.mri_curvature, sigma, cfg.schedule);
    }
  }

  const bool em = pet_data && !cfg.literal_mode && cfg.pet_step == PetStep::em;
  if (em) wp = cfg.dc_weight_pet;

  auto& x = state.x;
  ImagePair z = ImagePair::zeros(x.height(), x.width());
  for (int step = 0; step < cfg.steps_per_level; ++step) {
    const ImagePair s = source.score(x, sigma);
    noise.fill(z, modality);
    if (do_pet) {
      RealGrid drift = s.pet;
      if (em) {
        if (state.pet_sensitivity.size() == 0) state.pet_sensitivity = sensitivity(*data.pet);
        // Relaxed EM step: the gradient in the metric diag(u / c A*1).
        const RealGrid up = x.pet.cwiseMax(0.0).array() + kEmOffset;
        const RealGrid g = poisson_dc_gradient(up, *data.pet, cfg.pet_floor);
        x.pet += alpha * drift + noise_scale * z.pet;
        x.pet.array() -= wp * up.array() * g.array() / state.pet_sensitivity.array();
      } else {
        if (pet_data) drift -= wp * poisson_dc_gradient(x.pet, *data.pet, cfg.pet_floor);
        x.pet += alpha * drift + noise_scale * z.pet;
      }
    }
    if (do_mri) {
      ComplexGrid drift = s.mri;
      if (mri_data) drift -= wm * gaussian_dc_gradient(x.mri, *data.mri);
      x.mri += alpha * drift + noise_scale * z.mri;
    }
    if (!all_finite(x.pet) || !all_finite(x.mri)) {
      throw DivergenceError("sampler: non-finite iterate at level " + std::to_string(level) +
                            " (sigma = " + fmt(sigma) + "); reduce step_scale or the data weights");
    }
  }
  if (do_pet) x.pet = x.pet.cwiseMax(0.0);
  state.level = level;
  state.trace.push_back({level, sigma,
                         data.pet ? poisson_objective(x.pet, *data.pet, cfg.pet_floor) : std::nan(""),
                         data.mri ? gaussian_objective(x.mri, *data.mri) : std::nan(""),
                         x.pet.norm(), x.mri.norm()});
}

namespace {

SamplerResult run_sampler(Modality modality, const Measurements& data, const ScoreSource& source,
                          const SamplerConfig& cfg, Eigen::Index h, Eigen::Index w) {
  cfg.validate();
  SamplerState state;
  state.x = ImagePair::zeros(h, w);
  StreamNoise init(RandomStream(cfg.seed, "sampler/init"));
  ImagePair z = ImagePair::zeros(h, w);
  init.fill(z, modality);
  const double smax = cfg.schedule.sigma_max;
  if (covers_pet(modality)) state.x.pet = (smax * z.pet).cwiseAbs();
  if (covers_mri(modality)) state.x.mri = smax * z.mri;
  state.level = cfg.schedule.n_steps;

  StreamNoise noise(RandomStream(cfg.seed, "sampler/noise"));
  while (state.level > 0) reverse_step(state, data, source, cfg, noise);
  return {std::move(state.x), std::move(state.trace)};
}

}  // namespace

SamplerResult reconstruct_joint(const Sinogram& f, const KSpaceData& g, const ScoreSource& source,
                                const SamplerConfig& cfg) {
  if (source.modality() != Modality::joint) {
    throw ParameterError("reconstruct_joint: score source must be joint, got " +
                         to_string(source.modality()));
  }
  const int m = f.geometry.image_size;
  if (g.mask.height != m || g.mask.width != m) {
    throw DimensionError("reconstruct_joint: sinogram geometry and k-space mask disagree on image size");
  }
  return run_sampler(Modality::joint, Measurements{f, g}, source, cfg, m, m);
}

SamplerResult reconstruct_single(Modality modality, const Measurements& data,
                                 const ScoreSource& source, const SamplerConfig& cfg) {
  if (modality == Modality::joint) throw ParameterError("reconstruct_single: modality must be pet or mri");
  if (source.modality() != modality) {
    throw ParameterError("reconstruct_single: " + to_string(modality) + " run needs a " +
                         to_string(modality) + " score source, got " + to_string(source.modality()));
  }
  Measurements own;
  Eigen::Index h = 0, w = 0;
  if (modality == Modality::pet) {
    if (!data.pet) throw ParameterError("reconstruct_single: PET run without a sinogram");
    own.pet = data.pet;
    h = w = data.pet->geometry.image_size;
  } else {
    if (!data.mri) throw ParameterError("reconstruct_single: MRI run without k-space data");
    own.mri = data.mri;
    h = data.mri->mask.height;
    w = data.mri->mask.width;
  }
  return run_sampler(modality, own, source, cfg, h, w);
}

std::string trace_csv(const std::vector<TraceRow>& trace) {
  std::ostringstream out;
  out << "level,sigma,poisson_objective,gaussian_objective,u_norm,v_norm\n";
  for (const auto& r : trace) {
    out << r.level << ',' << fmt(r.sigma) << ',' << fmt(r.poisson_objective) << ','
        << fmt(r.gaussian_objective) << ',' << fmt(r.u_norm) << ',' << fmt(r.v_norm) << '\n';
  }
  return out.str();
}

}  // namespace jointrecon
