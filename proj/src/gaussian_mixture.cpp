#include "jointrecon/gaussian_mixture.hpp"

#include <cmath>
#include <numbers>

namespace jointrecon {

namespace {

void check_dimension(const Eigen::VectorXd& x, const GaussianMixture& gm) {
  if (x.size() != gm.dimension()) {
    throw DimensionError("gaussian mixture: vector has dimension " + std::to_string(x.size()) +
                         ", mixture has " + std::to_string(gm.dimension()));
  }
}

// log(w_k) + log N(x; mu_k, tau_k^2 I) for every component.
Eigen::VectorXd component_log_terms(const Eigen::VectorXd& x, const GaussianMixture& gm) {
  const double d = static_cast<double>(gm.dimension());
  Eigen::VectorXd t(static_cast<Eigen::Index>(gm.components()));
  for (std::size_t k = 0; k < gm.components(); ++k) {
    const double var = gm.stds[k] * gm.stds[k];
    t[static_cast<Eigen::Index>(k)] = std::log(gm.weights[k]) -
                                      0.5 * d * std::log(2.0 * std::numbers::pi * var) -
                                      0.5 * (x - gm.means[k]).squaredNorm() / var;
  }
  return t;
}

}  // namespace

void GaussianMixture::validate() const {
  if (weights.empty()) throw ParameterError("gaussian mixture: no components");
  if (means.size() != weights.size() || stds.size() != weights.size()) {
    throw ParameterError("gaussian mixture: weights, means and stds differ in length");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (!(weights[k] > 0.0)) throw ParameterError("gaussian mixture: weights must be > 0");
    if (!(stds[k] > 0.0)) throw ParameterError("gaussian mixture: stds must be > 0");
    if (means[k].size() != means.front().size() || means[k].size() == 0) {
      throw ParameterError("gaussian mixture: means must share one nonzero dimension");
    }
    if (!means[k].allFinite()) throw ParameterError("gaussian mixture: non-finite mean");
    total += weights[k];
  }
  if (std::abs(total - 1.0) > 1e-9) throw ParameterError("gaussian mixture: weights must sum to 1");
}

GaussianMixture GaussianMixture::perturbed(double sigma) const {
  if (!(sigma >= 0.0)) throw ParameterError("gaussian mixture: perturbation sigma must be >= 0");
  GaussianMixture out = *this;
  for (auto& s : out.stds) s = std::sqrt(s * s + sigma * sigma);
  return out;
}

GaussianMixture GaussianMixture::marginal(const std::vector<Eigen::Index>& coords) const {
  if (coords.empty()) throw ParameterError("gaussian mixture: empty marginal");
  GaussianMixture out = *this;
  for (auto& mu : out.means) {
    Eigen::VectorXd kept(static_cast<Eigen::Index>(coords.size()));
    for (std::size_t i = 0; i < coords.size(); ++i) {
      if (coords[i] < 0 || coords[i] >= mu.size()) {
        throw DimensionError("gaussian mixture: marginal coordinate out of range");
      }
      kept[static_cast<Eigen::Index>(i)] = mu[coords[i]];
    }
    mu = std::move(kept);
  }
  return out;
}

void to_json(nlohmann::json& j, const GaussianMixture& gm) {
  j = nlohmann::json::object();
  j["weights"] = gm.weights;
  j["stds"] = gm.stds;
  j["means"] = nlohmann::json::array();
  for (const auto& mu : gm.means) {
    j["means"].push_back(std::vector<double>(mu.data(), mu.data() + mu.size()));
  }
}

void from_json(const nlohmann::json& j, GaussianMixture& gm) {
  gm.weights = j.at("weights").get<std::vector<double>>();
  gm.stds = j.at("stds").get<std::vector<double>>();
  gm.means.clear();
  for (const auto& m : j.at("means")) {
    const auto v = m.get<std::vector<double>>();
    gm.means.push_back(Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size())));
  }
  gm.validate();
}

double gm_log_density(const Eigen::VectorXd& x, const GaussianMixture& gm) {
  check_dimension(x, gm);
  const auto t = component_log_terms(x, gm);
  const double peak = t.maxCoeff();
  return peak + std::log((t.array() - peak).exp().sum());
}

Eigen::VectorXd gm_responsibilities(const Eigen::VectorXd& x, const GaussianMixture& gm) {
  check_dimension(x, gm);
  const auto t = component_log_terms(x, gm);
  Eigen::VectorXd r = (t.array() - t.maxCoeff()).exp();
  return r / r.sum();
}

Eigen::VectorXd gm_score(const Eigen::VectorXd& x, const GaussianMixture& gm) {
  const auto r = gm_responsibilities(x, gm);
  Eigen::VectorXd s = Eigen::VectorXd::Zero(x.size());
  for (std::size_t k = 0; k < gm.components(); ++k) {
    s += r[static_cast<Eigen::Index>(k)] / (gm.stds[k] * gm.stds[k]) * (gm.means[k] - x);
  }
  return s;
}

Eigen::VectorXd stack(const ImagePair& pair) {
  const Eigen::Index n = pair.pet.size();
  if (pair.mri.rows() != pair.pet.rows() || pair.mri.cols() != pair.pet.cols()) {
    throw DimensionError("stack: PET and MRI shapes differ");
  }
  Eigen::VectorXd x(3 * n);
  x.segment(0, n) = pair.pet.reshaped<Eigen::RowMajor>();
  x.segment(n, n) = pair.mri.real().reshaped<Eigen::RowMajor>();
  x.segment(2 * n, n) = pair.mri.imag().reshaped<Eigen::RowMajor>();
  return x;
}

ImagePair unstack(const Eigen::VectorXd& x, Eigen::Index height, Eigen::Index width) {
  const Eigen::Index n = height * width;
  if (x.size() != 3 * n) throw DimensionError("unstack: vector length does not match 3 H W");
  ImagePair p = ImagePair::zeros(height, width);
  for (Eigen::Index k = 0; k < n; ++k) {
    p.pet.data()[k] = x[k];
    p.mri.data()[k] = Complex(x[n + k], x[2 * n + k]);
  }
  return p;
}

}  // namespace jointrecon
