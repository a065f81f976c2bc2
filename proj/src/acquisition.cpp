#include "jointrecon/acquisition.hpp"

namespace jointrecon {

void AcquisitionConfig::validate() const {
  if (!(counts_target > 0.0)) throw ParameterError("acquisition: counts_target must be > 0");
  if (!(mri_noise_std >= 0.0)) throw ParameterError("acquisition: mri_noise_std must be >= 0");
  if (!(accel >= 1.0)) throw ParameterError("acquisition: accel must be >= 1");
  if (!(center_fraction > 0.0 && center_fraction < 1.0)) {
    throw ParameterError("acquisition: center_fraction must lie in (0, 1)");
  }
}

void to_json(nlohmann::json& j, const AcquisitionConfig& c) {
  j = nlohmann::json{{"counts_target", c.counts_target},
                     {"mri_noise_std", c.mri_noise_std},
                     {"accel", c.accel},
                     {"center_fraction", c.center_fraction},
                     {"noiseless_pet", c.noiseless_pet}};
}

void from_json(const nlohmann::json& j, AcquisitionConfig& c) {
  j.at("counts_target").get_to(c.counts_target);
  j.at("mri_noise_std").get_to(c.mri_noise_std);
  j.at("accel").get_to(c.accel);
  j.at("center_fraction").get_to(c.center_fraction);
  c.noiseless_pet = j.value("noiseless_pet", false);
  c.validate();
}

Sinogram simulate_pet(const RealGrid& u, const RadonGeometry& geom, const AcquisitionConfig& cfg,
                      RandomStream& stream) {
  cfg.validate();
  if ((u.array() < 0.0).any()) throw ParameterError("simulate_pet: activity must be >= 0");
  Sinogram s = radon_forward(u, geom);
  const double total = s.data.sum();
  if (!(total > 0.0)) {
    // Zero means pass straight through in noiseless mode.
    if (cfg.noiseless_pet) return s;
    throw SimulationError("simulate_pet: A u is identically zero, cannot reach counts_target");
  }
  s.scale = cfg.counts_target / total;
  s.data *= s.scale;
  if (!cfg.noiseless_pet) {
    for (Eigen::Index k = 0; k < s.data.size(); ++k) {
      s.data.data()[k] = static_cast<double>(stream.poisson(s.data.data()[k]));
    }
  }
  return s;
}

KSpaceData simulate_mri(const ComplexGrid& v, const SamplingMask& mask,
                        const AcquisitionConfig& cfg, RandomStream& stream) {
  cfg.validate();
  KSpaceData g = fourier_forward(v, mask);
  if (cfg.mri_noise_std > 0.0) {
    for (Eigen::Index i = 0; i < g.data.rows(); ++i) {
      for (int c = 0; c < mask.width; ++c) {
        if (!mask.kept[static_cast<std::size_t>(c)]) continue;
        const double re = stream.gaussian();
        const double im = stream.gaussian();
        g.data(i, c) += cfg.mri_noise_std * Complex(re, im);
      }
    }
  }
  return g;
}

}  // namespace jointrecon
