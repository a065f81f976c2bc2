#include <doctest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "jointrecon/fourier.hpp"
#include "jointrecon/radon.hpp"
#include "test_support.hpp"

using namespace jointrecon;
using namespace jointrecon::testing;

namespace {

// Independent ray model: detector coordinate of a pixel centre, measured in
// bins from detector 0.
double detector_position(const RadonGeometry& g, int row, int col, double angle) {
  const double x = col - (g.image_size - 1) / 2.0;
  const double y = (g.image_size - 1) / 2.0 - row;
  const double spacing = std::sqrt(2.0) * g.image_size / g.n_detectors;
  return (x * std::cos(angle) + y * std::sin(angle)) / spacing + (g.n_detectors - 1) / 2.0;
}

double relative_adjoint_defect(double lhs, double rhs, double scale) {
  return std::abs(lhs - rhs) / (scale + 1e-300);
}

}  // namespace

TEST_CASE("radon_forward of zero is zero") {
  const auto geom = RadonGeometry::uniform(16, 16, 12);
  const auto s = radon_forward(RealGrid::Zero(16, 16), geom);
  CHECK(s.data.rows() == 16);
  CHECK(s.data.cols() == 12);
  CHECK(s.data.isZero(0.0));
}

TEST_CASE("impulse projects its unit mass onto the ray-traced detector position") {
  const int m = 33;
  RadonGeometry geom;
  geom.image_size = m;
  geom.n_detectors = 40;
  geom.angles = {0.0, 0.3, std::numbers::pi / 4, 2.0};
  RealGrid u = RealGrid::Zero(m, m);
  const int c = m / 2;
  u(c, c + 3) = 1.0;  // off-centre so the position is nontrivial
  const auto s = radon_forward(u, geom);
  for (int a = 0; a < 4; ++a) {
    CHECK(s.data.col(a).sum() == doctest::Approx(1.0).epsilon(1e-6));
    // Centre of mass of the projection lands on the traced position.
    const double p = detector_position(geom, c, c + 3, geom.angles[static_cast<std::size_t>(a)]);
    double com = 0.0;
    for (int k = 0; k < geom.n_detectors; ++k) com += k * s.data(k, a);
    CHECK(com == doctest::Approx(p).epsilon(1e-9));
    // At most the two neighbouring bins are hit.
    int hits = 0;
    for (int k = 0; k < geom.n_detectors; ++k) hits += s.data(k, a) != 0.0;
    CHECK(hits <= 2);
  }
  RealGrid centre = RealGrid::Zero(m, m);
  centre(c, c) = 1.0;
  const auto sc = radon_forward(centre, geom);
  for (int a = 0; a < 4; ++a) CHECK(std::abs(sc.data.col(a).sum() - 1.0) < 1e-6);
}

TEST_CASE("rotationally symmetric object projects consistently across angles") {
  const int m = 64;
  const int n_angles = 16;
  const auto geom = RadonGeometry::uniform(m, 64, n_angles);
  RealGrid u(m, m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      const double r = std::hypot(i - (m - 1) / 2.0, j - (m - 1) / 2.0);
      u(i, j) = r <= 20.0 ? 1.0 : 0.0;
    }
  }
  const auto s = radon_forward(u, geom);
  const double mass = u.sum();
  const Eigen::VectorXd reference = s.data.rowwise().mean();
  for (int a = 0; a < n_angles; ++a) {
    CAPTURE(a);
    const Eigen::VectorXd p = s.data.col(a);
    CHECK(std::abs(p.sum() - mass) <= 1e-12 * mass);
    double centroid = 0.0;
    for (int k = 0; k < geom.n_detectors; ++k) centroid += k * p(k);
    CHECK(centroid / mass == doctest::Approx((geom.n_detectors - 1) / 2.0).epsilon(1e-12));
    // Angles related by a symmetry of the square pixel lattice (reflection
    // through an axis or a diagonal) see the same pixelated disk.
    const Eigen::VectorXd mirrored = s.data.col((n_angles - a) % n_angles);
    CHECK((p - mirrored).norm() <= 1e-12 * p.norm());
    if (a <= n_angles / 2) {
      const Eigen::VectorXd swapped = s.data.col(n_angles / 2 - a);
      CHECK((p - swapped).norm() <= 1e-12 * p.norm());
    }
    // Across unrelated angles the pixel-driven model leaves a sampling
    // ripple (largest at 0 and pi/2) on top of the staircase disk edge.
    CHECK((p - reference).norm() / reference.norm() < 0.07);
  }
}

TEST_CASE("radon adjoint identity over 50 seeds") {
  const auto geom = RadonGeometry::uniform(64, 64, 60);
  for (int seed = 0; seed < 50; ++seed) {
    RandomStream rng(static_cast<std::uint64_t>(seed), "radon-adjoint");
    const RealGrid x = random_real(64, 64, rng);
    Sinogram y{geom, random_real(64, 60, rng), 1.0};
    const auto ax = radon_forward(x, geom);
    const double lhs = inner_product(ax.data, y.data);
    const double rhs = inner_product(x, radon_adjoint(y));
    CHECK(relative_adjoint_defect(lhs, rhs, ax.data.norm() * y.data.norm()) < 1e-10);
  }
}

TEST_CASE("radon_adjoint of zero and of a single bin") {
  const auto geom = RadonGeometry::uniform(24, 20, 7);
  Sinogram s{geom, RealGrid::Zero(20, 7), 1.0};
  CHECK(radon_adjoint(s).isZero(0.0));

  const int bin = 8, angle = 3;
  s.data(bin, angle) = 1.0;
  const auto back = radon_adjoint(s);
  // Footprint: pixels whose traced position lies strictly within one bin of
  // the selected detector.
  std::set<Eigen::Index> footprint;
  for (int i = 0; i < 24; ++i) {
    for (int j = 0; j < 24; ++j) {
      const double p = detector_position(geom, i, j, geom.angles[angle]);
      if (std::abs(p - bin) < 1.0) footprint.insert(static_cast<Eigen::Index>(i) * 24 + j);
    }
  }
  REQUIRE(!footprint.empty());
  for (Eigen::Index k = 0; k < back.size(); ++k) {
    if (back.data()[k] != 0.0) CHECK(footprint.count(k) == 1);
  }
  CHECK(back.sum() > 0.0);
}

TEST_CASE("radon is linear and preserves nonnegativity") {
  const auto geom = RadonGeometry::uniform(32, 32, 20);
  RandomStream rng(17, "radon-linear");
  for (int trial = 0; trial < 10; ++trial) {
    const RealGrid u1 = random_real(32, 32, rng);
    const RealGrid u2 = random_real(32, 32, rng);
    const double alpha = rng.gaussian();
    const RealGrid combo = alpha * u1 + u2;
    const RealGrid lhs = radon_forward(combo, geom).data;
    const RealGrid rhs = alpha * radon_forward(u1, geom).data + radon_forward(u2, geom).data;
    CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
    const RealGrid pos = random_positive(32, 32, rng, 0.0, 1.0);
    CHECK((radon_forward(pos, geom).data.array() >= 0.0).all());
  }
}

TEST_CASE("radon rejects mismatched shapes and bad geometry") {
  const auto geom = RadonGeometry::uniform(16, 16, 8);
  CHECK_THROWS_AS(radon_forward(RealGrid::Zero(16, 15), geom), DimensionError);
  Sinogram bad{geom, RealGrid::Zero(15, 8), 1.0};
  CHECK_THROWS_AS(radon_adjoint(bad), DimensionError);
  RadonGeometry g2 = geom;
  g2.angles = {0.5, 0.2};
  CHECK_THROWS_AS(g2.validate(), GeometryError);
  g2.angles = {0.0, 4.0};
  CHECK_THROWS_AS(g2.validate(), GeometryError);
  CHECK_THROWS_AS(RadonGeometry::uniform(16, 0, 8), GeometryError);
}

TEST_CASE("geometry survives a JSON round trip") {
  const auto geom = RadonGeometry::uniform(64, 128, 300);
  const auto back = nlohmann::json::parse(nlohmann::json(geom).dump()).get<RadonGeometry>();
  CHECK(back == geom);
}

TEST_CASE("constant image has only a DC coefficient") {
  const int n = 16;
  const Complex c(0.7, -0.2);
  const ComplexGrid v = ComplexGrid::Constant(n, n, c);
  const auto k = fourier_forward(v, SamplingMask::full(n, n));
  CHECK(std::abs(k.data(n / 2, n / 2) - c * static_cast<double>(n)) < 1e-10);
  ComplexGrid rest = k.data;
  rest(n / 2, n / 2) = 0.0;
  CHECK(rest.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("full-mask Fourier operator is unitary") {
  RandomStream rng(23, "unitary");
  const std::pair<int, int> shapes[] = {{64, 64}, {15, 8}, {9, 9}, {1, 1}, {1, 6}, {5, 1}};
  for (const auto [h, w] : shapes) {
    const auto mask = SamplingMask::full(h, w);
    for (int trial = 0; trial < 5; ++trial) {
      const auto v = random_complex(h, w, rng);
      const auto k = fourier_forward(v, mask);
      CHECK(std::abs(k.data.norm() - v.norm()) <= 1e-10 * v.norm());
      CHECK((fourier_adjoint(k) - v).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("masked Fourier operator: zeros outside mask, adjointness, linearity") {
  RandomStream rng(29, "fourier-adjoint");
  auto mask_rng = rng.derive("mask");
  const auto mask = make_cartesian_mask(64, 4.0, 0.08, mask_rng);
  for (int trial = 0; trial < 50; ++trial) {
    const auto v = random_complex(64, 64, rng);
    const auto k = fourier_forward(v, mask);
    for (int c = 0; c < 64; ++c) {
      if (!mask.kept[static_cast<std::size_t>(c)]) CHECK(k.data.col(c).isZero(0.0));
    }
    KSpaceData g{mask, random_complex(64, 64, rng)};
    const Complex lhs = inner_product(k.data, g.data);
    const Complex rhs = inner_product(v, fourier_adjoint(g));
    CHECK(std::abs(lhs - rhs) / (k.data.norm() * g.data.norm()) < 1e-10);
  }
  const auto v1 = random_complex(64, 64, rng);
  const auto v2 = random_complex(64, 64, rng);
  const Complex alpha(rng.gaussian(), rng.gaussian());
  const ComplexGrid combo = alpha * v1 + v2;
  const ComplexGrid lhs = fourier_forward(combo, mask).data;
  const ComplexGrid rhs = alpha * fourier_forward(v1, mask).data + fourier_forward(v2, mask).data;
  CHECK((lhs - rhs).norm() <= 1e-10 * rhs.norm());
  KSpaceData zero{mask, ComplexGrid::Zero(64, 64)};
  CHECK(fourier_adjoint(zero).isZero(0.0));
}

TEST_CASE("mask application is idempotent") {
  RandomStream rng(31, "idem");
  const auto mask = make_cartesian_mask(32, 3.0, 0.1, rng);
  ComplexGrid k = random_complex(32, 32, rng);
  mask.apply(k);
  ComplexGrid twice = k;
  mask.apply(twice);
  CHECK(twice == k);
}

TEST_CASE("Fourier shape checks") {
  CHECK_THROWS_AS(fourier_forward(ComplexGrid::Zero(8, 8), SamplingMask::full(8, 7)),
                  DimensionError);
}

TEST_CASE("Cartesian mask line counts") {
  RandomStream rng(1, "mask");
  const auto full = make_cartesian_mask(64, 1.0, 0.08, rng);
  CHECK(full.kept_count() == 64);

  const auto r4 = make_cartesian_mask(64, 4.0, 0.08, rng);
  CHECK(r4.kept_count() == 16);  // ceil(64 / 4)
  // ceil(64 * 0.08) = 6 central lines around column 32.
  for (int c = 29; c < 35; ++c) CHECK(r4.kept[static_cast<std::size_t>(c)]);
  CHECK(r4.kept[32]);

  CHECK(make_cartesian_mask(128, 3.0, 0.08, rng).kept_count() == 43);
  CHECK(make_cartesian_mask(128, 5.0, 0.08, rng).kept_count() == 26);
}

TEST_CASE("Cartesian mask is deterministic per stream and validates parameters") {
  RandomStream a(5, "m"), b(5, "m"), c(5, "other");
  const auto ma = make_cartesian_mask(96, 4.0, 0.08, a);
  CHECK(ma == make_cartesian_mask(96, 4.0, 0.08, b));
  CHECK_FALSE(ma == make_cartesian_mask(96, 4.0, 0.08, c));
  CHECK_THROWS_AS(make_cartesian_mask(64, 0.5, 0.08, a), ParameterError);
  CHECK_THROWS_AS(make_cartesian_mask(64, 4.0, 0.0, a), ParameterError);
  CHECK_THROWS_AS(make_cartesian_mask(64, 4.0, 1.0, a), ParameterError);
  CHECK_THROWS_AS(make_cartesian_mask(64, 16.0, 0.2, a), ParameterError);
}

TEST_CASE("mask JSON round trip") {
  RandomStream rng(2, "mask-json");
  const auto mask = make_cartesian_mask(48, 3.0, 0.08, rng, 40);
  const auto back = nlohmann::json::parse(nlohmann::json(mask).dump()).get<SamplingMask>();
  CHECK(back == mask);
  CHECK(back.height == 40);
}
