#pragma once

#include <vector>

#include <json.hpp>

#include "jointrecon/grid.hpp"

namespace jointrecon {

/// Isotropic Gaussian mixture over stacked pair vectors (PET, MRI-re, MRI-im).
struct GaussianMixture {
  std::vector<double> weights;
  std::vector<Eigen::VectorXd> means;
  std::vector<double> stds;

  Eigen::Index dimension() const { return means.empty() ? 0 : means.front().size(); }
  std::size_t components() const { return weights.size(); }
  void validate() const;

  /// The mixture convolved with N(0, sigma^2 I): every std becomes
  /// sqrt(std^2 + sigma^2).
  GaussianMixture perturbed(double sigma) const;

  /// Marginal over the listed coordinates (isotropic components marginalise
  /// by dropping the other coordinates of each mean).
  GaussianMixture marginal(const std::vector<Eigen::Index>& coords) const;
};

void to_json(nlohmann::json& j, const GaussianMixture& gm);
void from_json(const nlohmann::json& j, GaussianMixture& gm);

/// log sum_k w_k N(x; mu_k, tau_k^2 I), evaluated with log-sum-exp.
double gm_log_density(const Eigen::VectorXd& x, const GaussianMixture& gm);

/// Gradient of gm_log_density: sum_k r_k(x) (mu_k - x) / tau_k^2.
Eigen::VectorXd gm_score(const Eigen::VectorXd& x, const GaussianMixture& gm);

/// Posterior responsibilities r_k(x).
Eigen::VectorXd gm_responsibilities(const Eigen::VectorXd& x, const GaussianMixture& gm);

/// Stacked layout [pet (row-major), mri.real, mri.imag].
Eigen::VectorXd stack(const ImagePair& pair);
ImagePair unstack(const Eigen::VectorXd& x, Eigen::Index height, Eigen::Index width);

}  // namespace jointrecon
