#pragma once

#include <vector>

#include <json.hpp>

#include "jointrecon/grid.hpp"

namespace jointrecon {

/// Parallel-beam geometry for a square m x m image with unit pixels. The
/// detector axis spans the image diagonal (m * sqrt(2)) with n_detectors
/// uniform bins; angles are in [0, pi) and strictly increasing.
struct RadonGeometry {
  int image_size = 0;
  int n_detectors = 0;
  std::vector<double> angles;

  static RadonGeometry uniform(int image_size, int n_detectors, int n_angles);

  int n_angles() const { return static_cast<int>(angles.size()); }
  double detector_spacing() const;
  /// Throws GeometryError when an invariant is violated.
  void validate() const;

  bool operator==(const RadonGeometry&) const = default;
};

void to_json(nlohmann::json& j, const RadonGeometry& g);
void from_json(const nlohmann::json& j, RadonGeometry& g);

/// PET measurement: counts over (detector bin x angle). `scale` is the count
/// scale c relating expected counts to the projector, lambda = c * A u; it is
/// 1 unless the sinogram came out of the acquisition simulator.
struct Sinogram {
  RadonGeometry geometry;
  RealGrid data;
  double scale = 1.0;

  /// M, the number of bins in the Poisson sum.
  Eigen::Index bins() const { return data.size(); }
};

/// Pixel-driven projector: every pixel centre is projected onto the detector
/// axis and its value split between the two nearest bins by linear
/// interpolation (edge positions fold into the outermost bin, so each angle
/// conserves mass). Bins hold the ray integral aggregated over the bin width.
Sinogram radon_forward(const RealGrid& u, const RadonGeometry& geom);

/// Backprojection with the transposed interpolation weights: the exact adjoint
/// of radon_forward.
RealGrid radon_adjoint(const Sinogram& s);

/// Forward projection including the sinogram's count scale: scale * A u.
RealGrid expected_counts(const RealGrid& u, const Sinogram& like);

}  // namespace jointrecon
