#include "jointrecon/score_source.hpp"

namespace jointrecon {

std::string to_string(Modality m) {
  switch (m) {
    case Modality::joint: return "joint";
    case Modality::pet: return "pet";
    case Modality::mri: return "mri";
  }
  return "?";
}

Modality parse_modality(const std::string& name) {
  if (name == "joint") return Modality::joint;
  if (name == "pet") return Modality::pet;
  if (name == "mri") return Modality::mri;
  throw ParameterError("unknown modality '" + name + "' (expected joint, pet or mri)");
}

int image_channels(Modality m) {
  return m == Modality::joint ? 3 : (m == Modality::pet ? 1 : 2);
}

bool covers_pet(Modality m) { return m != Modality::mri; }
bool covers_mri(Modality m) { return m != Modality::pet; }

MixtureScore::MixtureScore(GaussianMixture joint, Modality modality)
    : modality_(modality), pixels_(0) {
  joint.validate();
  if (joint.dimension() % 3 != 0) {
    throw DimensionError("mixture score: dimension must be 3 x pixel count");
  }
  pixels_ = joint.dimension() / 3;
  std::vector<Eigen::Index> coords;
  const Eigen::Index lo = modality == Modality::mri ? pixels_ : 0;
  const Eigen::Index hi = modality == Modality::pet ? pixels_ : 3 * pixels_;
  for (Eigen::Index k = lo; k < hi; ++k) coords.push_back(k);
  active_ = modality == Modality::joint ? std::move(joint) : joint.marginal(coords);
}

ImagePair MixtureScore::score(const ImagePair& x, double sigma) const {
  if (x.pet.size() != pixels_) {
    throw DimensionError("mixture score: image has " + std::to_string(x.pet.size()) +
                         " pixels, mixture expects " + std::to_string(pixels_));
  }
  const auto gm = active_.perturbed(sigma);
  const auto full = stack(x);
  ImagePair out = ImagePair::zeros(x.height(), x.width());
  switch (modality_) {
    case Modality::joint:
      return unstack(gm_score(full, gm), x.height(), x.width());
    case Modality::pet: {
      const Eigen::VectorXd s = gm_score(full.head(pixels_), gm);
      for (Eigen::Index k = 0; k < pixels_; ++k) out.pet.data()[k] = s[k];
      return out;
    }
    case Modality::mri: {
      const Eigen::VectorXd s = gm_score(full.tail(2 * pixels_), gm);
      for (Eigen::Index k = 0; k < pixels_; ++k) out.mri.data()[k] = Complex(s[k], s[pixels_ + k]);
      return out;
    }
  }
  return out;
}

}  // namespace jointrecon
