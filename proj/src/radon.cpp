#include "jointrecon/radon.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace jointrecon {

namespace {

// Interpolation weights of one pixel at one angle: (lower bin, upper bin, w)
// with the lower bin receiving 1 - w.
struct Splat {
  int lo;
  int hi;
  double w;
};

class DetectorMap {
 public:
  DetectorMap(const RadonGeometry& g, int angle)
      : m_(g.image_size),
        n_(g.n_detectors),
        inv_spacing_(1.0 / g.detector_spacing()),
        c_(std::cos(g.angles[static_cast<std::size_t>(angle)])),
        s_(std::sin(g.angles[static_cast<std::size_t>(angle)])) {}

  Splat at(int row, int col) const {
    const double half = 0.5 * (m_ - 1);
    const double x = col - half;
    const double y = half - row;
    const double p = (x * c_ + y * s_) * inv_spacing_ + 0.5 * (n_ - 1);
    const double fl = std::floor(p);
    const int k0 = static_cast<int>(fl);
    return {std::clamp(k0, 0, n_ - 1), std::clamp(k0 + 1, 0, n_ - 1), p - fl};
  }

 private:
  int m_;
  int n_;
  double inv_spacing_;
  double c_;
  double s_;
};

void require_image(const RealGrid& u, const RadonGeometry& geom) {
  if (u.rows() != geom.image_size || u.cols() != geom.image_size) {
    throw DimensionError("radon: image is " + std::to_string(u.rows()) + "x" +
                         std::to_string(u.cols()) + ", geometry expects " +
                         std::to_string(geom.image_size) + "x" + std::to_string(geom.image_size));
  }
}

void require_sinogram(const Sinogram& s) {
  if (s.data.rows() != s.geometry.n_detectors || s.data.cols() != s.geometry.n_angles()) {
    throw DimensionError("radon: sinogram raster does not match its geometry");
  }
}

}  // namespace

RadonGeometry RadonGeometry::uniform(int image_size, int n_detectors, int n_angles) {
  RadonGeometry g;
  g.image_size = image_size;
  g.n_detectors = n_detectors;
  g.angles.resize(static_cast<std::size_t>(std::max(n_angles, 0)));
  for (int a = 0; a < n_angles; ++a) {
    g.angles[static_cast<std::size_t>(a)] = std::numbers::pi * a / n_angles;
  }
  g.validate();
  return g;
}

double RadonGeometry::detector_spacing() const {
  return image_size * std::numbers::sqrt2 / n_detectors;
}

void RadonGeometry::validate() const {
  if (image_size < 1) throw GeometryError("geometry: image_size must be >= 1");
  if (n_detectors < 1) throw GeometryError("geometry: n_detectors must be >= 1");
  if (angles.empty()) throw GeometryError("geometry: at least one angle required");
  for (std::size_t a = 0; a < angles.size(); ++a) {
    if (!(angles[a] >= 0.0 && angles[a] < std::numbers::pi)) {
      throw GeometryError("geometry: angles must lie in [0, pi)");
    }
    if (a > 0 && !(angles[a] > angles[a - 1])) {
      throw GeometryError("geometry: angles must be strictly increasing");
    }
  }
}

void to_json(nlohmann::json& j, const RadonGeometry& g) {
  j = nlohmann::json{{"image_size", g.image_size},
                     {"n_detectors", g.n_detectors},
                     {"angles", g.angles}};
}

void from_json(const nlohmann::json& j, RadonGeometry& g) {
  j.at("image_size").get_to(g.image_size);
  j.at("n_detectors").get_to(g.n_detectors);
  j.at("angles").get_to(g.angles);
  g.validate();
}

Sinogram radon_forward(const RealGrid& u, const RadonGeometry& geom) {
  geom.validate();
  require_image(u, geom);
  const int m = geom.image_size;
  Sinogram out{geom, RealGrid::Zero(geom.n_detectors, geom.n_angles()), 1.0};
  std::vector<double> column(static_cast<std::size_t>(geom.n_detectors));
  for (int a = 0; a < geom.n_angles(); ++a) {
    const DetectorMap map(geom, a);
    std::fill(column.begin(), column.end(), 0.0);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const double v = u(i, j);
        const Splat sp = map.at(i, j);
        column[static_cast<std::size_t>(sp.lo)] += (1.0 - sp.w) * v;
        column[static_cast<std::size_t>(sp.hi)] += sp.w * v;
      }
    }
    for (int k = 0; k < geom.n_detectors; ++k) out.data(k, a) = column[static_cast<std::size_t>(k)];
  }
  return out;
}

RealGrid radon_adjoint(const Sinogram& s) {
  s.geometry.validate();
  require_sinogram(s);
  const int m = s.geometry.image_size;
  RealGrid out = RealGrid::Zero(m, m);
  for (int a = 0; a < s.geometry.n_angles(); ++a) {
    const DetectorMap map(s.geometry, a);
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const Splat sp = map.at(i, j);
        out(i, j) += (1.0 - sp.w) * s.data(sp.lo, a) + sp.w * s.data(sp.hi, a);
      }
    }
  }
  return out;
}

RealGrid expected_counts(const RealGrid& u, const Sinogram& like) {
  return like.scale * radon_forward(u, like.geometry).data;
}

}  // namespace jointrecon
