#include "jointrecon/baselines.hpp"

#include <cmath>
#include <sstream>

#include "jointrecon/sampler.hpp"

namespace jointrecon {

void MlemConfig::validate() const {
  if (iterations < 1) throw ParameterError("mlem: iterations must be >= 1");
  if (!(floor > 0.0)) throw ParameterError("mlem: floor must be > 0");
}

void TvConfig::validate() const {
  if (iterations < 0) throw ParameterError("tv_cs: iterations must be >= 0");
  if (!(step > 0.0)) throw ParameterError("tv_cs: step must be > 0");
  if (!(tv_weight >= 0.0)) throw ParameterError("tv_cs: tv_weight must be >= 0");
  if (!(smoothing > 0.0)) throw ParameterError("tv_cs: smoothing must be > 0");
}

RealGrid fov_mask(int m) {
  RealGrid mask = RealGrid::Zero(m, m);
  const double c = (m - 1) / 2.0, r = m / 2.0;
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      if ((i - c) * (i - c) + (j - c) * (j - c) <= r * r) mask(i, j) = 1.0;
    }
  }
  return mask;
}

BaselineResult<RealGrid> mlem(const Sinogram& f, const MlemConfig& cfg, const RealGrid* start,
                              const std::function<void(int, const RealGrid&)>& observer) {
  cfg.validate();
  f.geometry.validate();
  if ((f.data.array() < 0.0).any()) throw ParameterError("mlem: sinogram must be >= 0");
  const int m = f.geometry.image_size;
  const RealGrid fov = fov_mask(m);
  Sinogram ones{f.geometry, RealGrid::Ones(f.data.rows(), f.data.cols()), 1.0};
  const RealGrid sensitivity = radon_adjoint(ones);
  for (Eigen::Index k = 0; k < fov.size(); ++k) {
    if (fov.data()[k] > 0.0 && !(sensitivity.data()[k] > 0.0)) {
      throw GeometryError("mlem: zero sensitivity inside the field of view");
    }
  }

  BaselineResult<RealGrid> out;
  if (start) {
    require_same_shape(*start, fov, "mlem start");
    if ((start->array() < 0.0).any()) throw ParameterError("mlem: start must be >= 0");
    out.image = *start;
  } else {
    out.image = fov;
  }
  auto& u = out.image;
  const RealGrid inv_sens =
      sensitivity.unaryExpr([](double s) { return s > 0.0 ? 1.0 / s : 0.0; });
  out.objective.push_back(poisson_objective(u, f, cfg.floor));
  for (int it = 1; it <= cfg.iterations; ++it) {
    Sinogram ratio = f;
    ratio.data = f.data.array() / expected_counts(u, f).array().max(cfg.floor);
    u = u.cwiseProduct(inv_sens).cwiseProduct(radon_adjoint(ratio));
    out.objective.push_back(poisson_objective(u, f, cfg.floor));
    if (observer) observer(it, u);
  }
  return out;
}

ComplexGrid zero_filled(const KSpaceData& g) { return fourier_adjoint(g); }

double tv_smooth(const ComplexGrid& v, double eps) {
  const Eigen::Index h = v.rows(), w = v.cols();
  double total = 0.0;
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const Complex dx = j + 1 < w ? v(i, j + 1) - v(i, j) : Complex(0.0);
      const Complex dy = i + 1 < h ? v(i + 1, j) - v(i, j) : Complex(0.0);
      total += std::sqrt(std::norm(dx) + std::norm(dy) + eps);
    }
  }
  return total;
}

ComplexGrid tv_smooth_gradient(const ComplexGrid& v, double eps) {
  const Eigen::Index h = v.rows(), w = v.cols();
  ComplexGrid px(h, w), py(h, w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      const Complex dx = j + 1 < w ? v(i, j + 1) - v(i, j) : Complex(0.0);
      const Complex dy = i + 1 < h ? v(i + 1, j) - v(i, j) : Complex(0.0);
      const double n = std::sqrt(std::norm(dx) + std::norm(dy) + eps);
      px(i, j) = dx / n;
      py(i, j) = dy / n;
    }
  }
  // D^T p with the same boundary convention.
  ComplexGrid grad = ComplexGrid::Zero(h, w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      if (j + 1 < w) {
        grad(i, j) -= px(i, j);
        grad(i, j + 1) += px(i, j);
      }
      if (i + 1 < h) {
        grad(i, j) -= py(i, j);
        grad(i + 1, j) += py(i, j);
      }
    }
  }
  return grad;
}

BaselineResult<ComplexGrid> tv_cs(const KSpaceData& g, const TvConfig& cfg) {
  cfg.validate();
  g.mask.validate();
  auto objective = [&](const ComplexGrid& v) {
    return gaussian_objective(v, g) + cfg.tv_weight * tv_smooth(v, cfg.smoothing);
  };
  BaselineResult<ComplexGrid> out;
  out.image = zero_filled(g);
  double current = objective(out.image);
  if (!std::isfinite(current)) throw DivergenceError("tv_cs: non-finite objective at the start");
  out.objective.push_back(current);
  double step = cfg.step;
  for (int it = 1; it <= cfg.iterations; ++it) {
    ComplexGrid grad = gaussian_dc_gradient(out.image, g);
    if (cfg.tv_weight > 0.0) grad += cfg.tv_weight * tv_smooth_gradient(out.image, cfg.smoothing);
    bool accepted = false;
    for (int halving = 0; halving < 60 && !accepted; ++halving) {
      const ComplexGrid trial = out.image - step * grad;
      const double value = objective(trial);
      if (!std::isfinite(value)) {
        throw DivergenceError("tv_cs: non-finite objective at iteration " + std::to_string(it));
      }
      if (value <= current) {
        out.image = trial;
        current = value;
        accepted = true;
      } else {
        step *= 0.5;
      }
    }
    if (!accepted) break;
    out.objective.push_back(current);
  }
  return out;
}

std::string objective_csv(const std::vector<double>& objective) {
  std::ostringstream out;
  out.precision(17);
  out << "iteration,objective\n";
  for (std::size_t k = 0; k < objective.size(); ++k) out << k << ',' << objective[k] << '\n';
  return out.str();
}

}  // namespace jointrecon
