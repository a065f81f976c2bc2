#pragma once

#include <string>

#include "jointrecon/gaussian_mixture.hpp"

namespace jointrecon {

/// Which channels a prior covers: both images, or one of them alone.
enum class Modality { joint, pet, mri };

std::string to_string(Modality m);
Modality parse_modality(const std::string& name);

/// Image channels of a modality in network order: joint (PET, MRI-re,
/// MRI-im), pet (PET), mri (MRI-re, MRI-im).
int image_channels(Modality m);
bool covers_pet(Modality m);
bool covers_mri(Modality m);

/// Score of the sigma-perturbed prior, grad log p_sigma(x). Channels outside
/// modality() are returned as zeros.
class ScoreSource {
 public:
  virtual ~ScoreSource() = default;
  virtual Modality modality() const = 0;
  virtual ImagePair score(const ImagePair& x, double sigma) const = 0;
};

/// Exact score of a Gaussian-mixture prior perturbed by N(0, sigma^2 I).
/// For pet or mri the mixture is marginalised onto that modality's channels.
class MixtureScore final : public ScoreSource {
 public:
  explicit MixtureScore(GaussianMixture joint, Modality modality = Modality::joint);

  Modality modality() const override { return modality_; }
  ImagePair score(const ImagePair& x, double sigma) const override;

  const GaussianMixture& mixture() const { return active_; }

 private:
  Modality modality_;
  Eigen::Index pixels_;
  GaussianMixture active_;
};

/// Zero score; useful for likelihood-only runs.
class ZeroScore final : public ScoreSource {
 public:
  explicit ZeroScore(Modality modality = Modality::joint) : modality_(modality) {}
  Modality modality() const override { return modality_; }
  ImagePair score(const ImagePair& x, double) const override {
    return ImagePair::zeros(x.height(), x.width());
  }

 private:
  Modality modality_;
};

}  // namespace jointrecon
