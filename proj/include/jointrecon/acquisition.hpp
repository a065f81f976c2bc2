#pragma once

#include <json.hpp>

#include "jointrecon/fourier.hpp"
#include "jointrecon/radon.hpp"

namespace jointrecon {

struct AcquisitionConfig {
  double counts_target = 1e5;    ///< expected total sinogram counts
  double mri_noise_std = 0.01;   ///< per-component k-space noise std
  double accel = 4.0;            ///< Cartesian acceleration R
  double center_fraction = 0.08;
  bool noiseless_pet = false;    ///< return the Poisson means instead of draws

  void validate() const;
};

void to_json(nlohmann::json& j, const AcquisitionConfig& c);
void from_json(const nlohmann::json& j, AcquisitionConfig& c);

/// Poisson sinogram with means lambda = c * A u, c scaled so that
/// sum(lambda) = counts_target. The returned sinogram records c as `scale`.
Sinogram simulate_pet(const RealGrid& u, const RadonGeometry& geom, const AcquisitionConfig& cfg,
                      RandomStream& stream);

/// g = mask o (F v + eta), eta complex Gaussian with per-component std
/// cfg.mri_noise_std.
KSpaceData simulate_mri(const ComplexGrid& v, const SamplingMask& mask,
                        const AcquisitionConfig& cfg, RandomStream& stream);

}  // namespace jointrecon
