#pragma once

#include <optional>
#include <string>
#include <vector>

#include "jointrecon/fourier.hpp"
#include "jointrecon/radon.hpp"
#include "jointrecon/schedule.hpp"
#include "jointrecon/score_source.hpp"

namespace jointrecon {

/// Source of the standard normal z used by forward diffusion and the
/// reverse update. Only the channels of `modality` are filled; the rest are
/// left zero.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual void fill(ImagePair& z, Modality modality) = 0;
};

class StreamNoise final : public NoiseSource {
 public:
  explicit StreamNoise(RandomStream stream) : stream_(std::move(stream)) {}
  void fill(ImagePair& z, Modality modality) override;

 private:
  RandomStream stream_;
};

class ZeroNoise final : public NoiseSource {
 public:
  void fill(ImagePair& z, Modality) override {
    z.pet.setZero();
    z.mri.setZero();
  }
};

/// x + sigma_i z on every channel.
ImagePair forward_diffuse(const ImagePair& x, int level, const NoiseSchedule& s, NoiseSource& noise);
ImagePair forward_diffuse(const ImagePair& x, int level, const NoiseSchedule& s, RandomStream& stream);

/// Poisson negative log-likelihood sum(lambda - f log max(lambda, floor)) with
/// lambda = c A u, c = f.scale.
double poisson_objective(const RealGrid& u, const Sinogram& f, double floor);

/// Gradient of poisson_objective: c A*(1 - f / max(c A u, floor)). With
/// c = 1 this is A*(1 - f / max(A u, floor)).
RealGrid poisson_dc_gradient(const RealGrid& u, const Sinogram& f, double floor);

/// 0.5 ||mask o F v - g||^2.
double gaussian_objective(const ComplexGrid& v, const KSpaceData& g);

/// F*(mask o F v - g).
ComplexGrid gaussian_dc_gradient(const ComplexGrid& v, const KSpaceData& g);

/// How the Poisson term enters the default-mode update. `gradient` adds
/// -a_i g_p lambda_p grad_p like the MRI term. `em` instead subtracts
/// lambda_p (u+ + eta) / (c A*1) * grad_p each step, a relaxed MLEM update
/// (lambda_p = 1 is one full EM iteration), with no a_i and no annealing.
/// The gradient step is badly conditioned for Radon data: at a stable step
/// size most image directions barely move.
enum class PetStep { gradient, em };
PetStep parse_pet_step(const std::string& name);

/// eta above: keeps zero pixels movable under the multiplicative EM metric.
inline constexpr double kEmOffset = 1e-3;

struct SamplerConfig {
  NoiseSchedule schedule;
  int steps_per_level = 3;
  double step_scale = 2.0;     ///< epsilon_0: step at sigma_max
  double dc_weight_pet = 1.0;  ///< lambda_p
  double dc_weight_mri = 1.0;  ///< lambda_m
  /// Scale each data gradient by (1 + L sigma_min^2) / (1 + L sigma_i^2),
  /// L its weighted curvature, so strong data cannot destabilise the early,
  /// large-step levels. The factor is 1 at the last level.
  bool anneal_likelihood = true;
  bool literal_mode = false;
  double pet_floor = 1e-8;
  PetStep pet_step = PetStep::gradient;
  std::uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SamplerConfig& c);
void from_json(const nlohmann::json& j, SamplerConfig& c);

/// Measured data; a single-modality run carries only one of the two.
struct Measurements {
  std::optional<Sinogram> pet;
  std::optional<KSpaceData> mri;
};

struct TraceRow {
  int level;
  double sigma;
  double poisson_objective;   ///< NaN when no PET data
  double gaussian_objective;  ///< NaN when no MRI data
  double u_norm;
  double v_norm;
};

struct SamplerState {
  ImagePair x;
  int level = 0;
  std::vector<TraceRow> trace;
  /// Weighted data curvatures used by likelihood annealing; computed on the
  /// first step when negative.
  double pet_curvature = -1.0;
  double mri_curvature = -1.0;
  RealGrid pet_sensitivity;  ///< c A*1, filled on the first EM step
};

/// One level of the reverse process: from state.level = i + 1 to i, using
/// sigma_i. Channels outside source.modality() are left untouched.
///
/// Default mode repeats steps_per_level times
///   x <- x + a_i [s(x, sigma_i) - g_p lambda_p grad_p - g_m lambda_m grad_m]
///          + sqrt(2 a_i) z,     a_i = epsilon_0 (sigma_i / sigma_max)^2,
/// with g_* the annealing factors (see PetStep for the EM variant of the PET
/// term). Literal mode repeats
///   x <- x + s(x, sigma_i) - grad_p - grad_m + z.
/// Both clamp u >= 0 afterwards and append one trace row.
void reverse_step(SamplerState& state, const Measurements& data, const ScoreSource& source,
                  const SamplerConfig& cfg, NoiseSource& noise);

/// Largest eigenvalue of the Poisson Hessian surrogate c^2 A* diag(1 / f) A
/// (bins with f = 0 dropped), by power iteration.
double poisson_curvature(const Sinogram& f, int iterations = 40);

struct SamplerResult {
  ImagePair image;
  std::vector<TraceRow> trace;
};

/// u_N = |sigma_max z|, v_N = sigma_max z, then reverse_step from level N
/// down to 0. Initial and per-step noise come from the "sampler/init" and
/// "sampler/noise" streams under cfg.seed.
SamplerResult reconstruct_joint(const Sinogram& f, const KSpaceData& g, const ScoreSource& source,
                                const SamplerConfig& cfg);

/// Same machinery for one modality: `data` must hold that modality's
/// measurement and `source` must be a single-modality prior for it. The
/// other image stays zero.
SamplerResult reconstruct_single(Modality modality, const Measurements& data,
                                 const ScoreSource& source, const SamplerConfig& cfg);

std::string trace_csv(const std::vector<TraceRow>& trace);

}  // namespace jointrecon
