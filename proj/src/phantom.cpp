#include "jointrecon/phantom.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace jointrecon {

namespace {

struct Ellipse {
  double cx, cy, a, b, theta;

  bool contains(double x, double y) const {
    const double c = std::cos(theta), s = std::sin(theta);
    const double dx = x - cx, dy = y - cy;
    const double xr = c * dx + s * dy;
    const double yr = -s * dx + c * dy;
    return (xr * xr) / (a * a) + (yr * yr) / (b * b) <= 1.0;
  }
};

int draw_count(RandomStream& rng, int lo, int hi) {
  return lo + static_cast<int>(rng.below(static_cast<std::uint64_t>(hi - lo + 1)));
}

}  // namespace

void PhantomSpec::validate() const {
  if (size < 16) throw ParameterError("phantom: size must be >= 16 (got " + std::to_string(size) + ")");
  if (min_ellipses < 1 || max_ellipses < min_ellipses) {
    throw ParameterError("phantom: ellipse count range must satisfy 1 <= min <= max");
  }
  if (min_lesions < 1 || max_lesions < min_lesions) {
    throw ParameterError("phantom: lesion count range must satisfy 1 <= min <= max");
  }
}

ImagePair make_phantom_pair(const PhantomSpec& spec, RandomStream& rng) {
  spec.validate();
  const int m = spec.size;

  const Ellipse head{rng.uniform(-0.05, 0.05), rng.uniform(-0.05, 0.05), rng.uniform(0.72, 0.84),
                     rng.uniform(0.82, 0.92), rng.uniform(-0.2, 0.2)};
  const Ellipse brain{head.cx, head.cy, 0.86 * head.a, 0.88 * head.b, head.theta};
  const double mri_rim = rng.uniform(0.7, 1.0);
  const double pet_rim = rng.uniform(0.08, 0.15);
  const double mri_tissue = rng.uniform(0.25, 0.45);
  const double pet_tissue = rng.uniform(0.15, 0.3);

  struct Region {
    Ellipse shape;
    double mri, pet;
  };
  std::vector<Region> regions;
  const int n_ellipses = draw_count(rng, spec.min_ellipses, spec.max_ellipses);
  for (int k = 0; k < n_ellipses; ++k) {
    const double r = 0.55 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Ellipse e{head.cx + r * std::cos(phi), head.cy + r * std::sin(phi),
                    rng.uniform(0.08, 0.35), rng.uniform(0.08, 0.35),
                    rng.uniform(0.0, std::numbers::pi)};
    regions.push_back({e, rng.uniform(0.1, 1.0), rng.uniform(0.1, 1.0)});
  }

  struct Blob {
    double cx, cy, width, amp;
  };
  std::vector<Blob> blobs;
  const int n_blobs = draw_count(rng, 2, 4);
  for (int k = 0; k < n_blobs; ++k) {
    const double r = 0.5 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    blobs.push_back({head.cx + r * std::cos(phi), head.cy + r * std::sin(phi),
                     rng.uniform(0.08, 0.2), rng.uniform(0.1, 0.4)});
  }

  struct Lesion {
    double cx, cy, radius, pet_amp, mri_value;
  };
  std::vector<Lesion> lesions;
  const int n_lesions = draw_count(rng, spec.min_lesions, spec.max_lesions);
  for (int k = 0; k < n_lesions; ++k) {
    const double r = 0.5 * std::sqrt(rng.uniform());
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    lesions.push_back({head.cx + r * std::cos(phi), head.cy + r * std::sin(phi),
                       rng.uniform(0.04, 0.09), rng.uniform(0.3, 0.8), rng.uniform(0.1, 1.0)});
  }

  std::array<double, 6> phase{};
  phase[0] = rng.uniform(-0.5, 0.5);
  for (std::size_t k = 1; k < phase.size(); ++k) phase[k] = rng.uniform(-0.3, 0.3);

  ImagePair pair = ImagePair::zeros(m, m);
  for (int i = 0; i < m; ++i) {
    const double y = 1.0 - 2.0 * (i + 0.5) / m;
    for (int j = 0; j < m; ++j) {
      const double x = 2.0 * (j + 0.5) / m - 1.0;
      if (!head.contains(x, y)) continue;
      double mag = mri_rim;
      double pet = pet_rim;
      if (brain.contains(x, y)) {
        mag = mri_tissue;
        pet = pet_tissue;
        for (const auto& reg : regions) {
          if (reg.shape.contains(x, y)) {
            mag = reg.mri;
            pet = reg.pet;
          }
        }
        for (const auto& bl : blobs) {
          const double d2 = (x - bl.cx) * (x - bl.cx) + (y - bl.cy) * (y - bl.cy);
          pet += bl.amp * std::exp(-0.5 * d2 / (bl.width * bl.width));
        }
        for (const auto& le : lesions) {
          const double d2 = (x - le.cx) * (x - le.cx) + (y - le.cy) * (y - le.cy);
          if (d2 <= le.radius * le.radius) {
            pet += le.pet_amp;
            mag = le.mri_value;
          }
        }
      }
      const double phi = phase[0] + phase[1] * x + phase[2] * y + phase[3] * x * x +
                         phase[4] * x * y + phase[5] * y * y;
      pair.pet(i, j) = pet;
      pair.mri(i, j) = std::polar(std::clamp(mag, 0.0, 1.0), phi);
    }
  }
  return pair;
}

}  // namespace jointrecon
