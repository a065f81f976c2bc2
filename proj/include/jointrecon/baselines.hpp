#pragma once

#include <functional>
#include <vector>

#include "jointrecon/fourier.hpp"
#include "jointrecon/radon.hpp"

namespace jointrecon {

struct MlemConfig {
  int iterations = 20;
  double floor = 1e-8;
  void validate() const;
};

struct TvConfig {
  int iterations = 200;
  double step = 1.0;
  double tv_weight = 0.01;
  double smoothing = 1e-6;  ///< epsilon inside the TV square root
  void validate() const;
};

/// Reconstruction plus the objective after each iteration (entry 0 is the
/// starting point).
template <typename GridT>
struct BaselineResult {
  GridT image;
  std::vector<double> objective;
};

/// Pixels whose centre lies within the inscribed circle of the m x m grid.
RealGrid fov_mask(int m);

/// u <- (u / A*1) o A*(f / max(c A u, floor)), starting from 1 inside the
/// field of view (or from `start` when given). `observer` sees every iterate.
BaselineResult<RealGrid> mlem(const Sinogram& f, const MlemConfig& cfg,
                              const RealGrid* start = nullptr,
                              const std::function<void(int, const RealGrid&)>& observer = {});

/// F* g.
ComplexGrid zero_filled(const KSpaceData& g);

/// Smoothed isotropic TV over forward differences with Neumann boundary:
/// sum sqrt(|Dx v|^2 + |Dy v|^2 + eps).
double tv_smooth(const ComplexGrid& v, double eps);
ComplexGrid tv_smooth_gradient(const ComplexGrid& v, double eps);

/// Gradient descent on 0.5 ||mask o F v - g||^2 + tv_weight * tv_smooth(v)
/// from the zero-filled image. A step that raises the objective is retried
/// at half the size; the search stops when 60 halvings fail.
BaselineResult<ComplexGrid> tv_cs(const KSpaceData& g, const TvConfig& cfg);

/// One iteration-indexed objective column.
std::string objective_csv(const std::vector<double>& objective);

}  // namespace jointrecon
