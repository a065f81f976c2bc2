#include <doctest.h>

#include <cmath>
#include <numbers>

#include "jointrecon/grid_io.hpp"
#include "jointrecon/training.hpp"
#include "test_support.hpp"

using namespace jointrecon;
using namespace jointrecon::testing;

namespace {

Eigen::VectorXd random_vector(Eigen::Index n, RandomStream& rng, double scale = 1.0) {
  Eigen::VectorXd v(n);
  for (Eigen::Index k = 0; k < n; ++k) v[k] = scale * rng.gaussian();
  return v;
}

GaussianMixture random_mixture(int k, Eigen::Index dim, RandomStream& rng) {
  GaussianMixture gm;
  double total = 0.0;
  for (int c = 0; c < k; ++c) {
    gm.weights.push_back(rng.uniform(0.2, 1.0));
    total += gm.weights.back();
    gm.means.push_back(random_vector(dim, rng));
    gm.stds.push_back(rng.uniform(0.4, 1.2));
  }
  for (auto& w : gm.weights) w /= total;
  return gm;
}

GaussianMixture single_gaussian(const Eigen::VectorXd& mean, double std) {
  return GaussianMixture{{1.0}, {mean}, {std}};
}

ImagePair random_pair(int m, RandomStream& rng) {
  return ImagePair{random_real(m, m, rng), random_complex(m, m, rng)};
}

}  // namespace

TEST_CASE("single Gaussian peak value and radial decay") {
  RandomStream rng(1, "gm");
  const Eigen::VectorXd mu = random_vector(6, rng);
  const double tau = 0.7;
  const auto gm = single_gaussian(mu, tau);
  CHECK(gm_log_density(mu, gm) ==
        doctest::Approx(-3.0 * std::log(2.0 * std::numbers::pi * tau * tau)).epsilon(1e-14));
  const Eigen::VectorXd dir = random_vector(6, rng).normalized();
  double previous = gm_log_density(mu, gm);
  for (int k = 1; k <= 20; ++k) {
    const double value = gm_log_density(mu + 0.25 * k * dir, gm);
    CHECK(value < previous);
    previous = value;
  }
}

TEST_CASE("two-dimensional mixture density integrates to one") {
  RandomStream rng(2, "gm");
  const auto gm = random_mixture(3, 2, rng);
  const double lo = -9.0, hi = 9.0;
  const int n = 721;
  const double h = (hi - lo) / (n - 1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double wi = (i == 0 || i == n - 1) ? 0.5 : 1.0;
      const double wj = (j == 0 || j == n - 1) ? 0.5 : 1.0;
      total += wi * wj * std::exp(gm_log_density(Eigen::Vector2d(lo + i * h, lo + j * h), gm));
    }
  }
  CHECK(std::abs(total * h * h - 1.0) < 1e-3);
}

TEST_CASE("log density stays finite far from every component") {
  const auto gm = single_gaussian(Eigen::VectorXd::Zero(3), 0.01);
  const Eigen::VectorXd far = Eigen::VectorXd::Constant(3, 50.0);
  CHECK(std::isfinite(gm_log_density(far, gm)));
  GaussianMixture two{{0.5, 0.5}, {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Ones(3)}, {0.01, 0.01}};
  CHECK(gm_score(far, two).allFinite());
}

TEST_CASE("single Gaussian score is (mu - x) / tau^2 and affine in x") {
  RandomStream rng(3, "gm");
  const Eigen::VectorXd mu = random_vector(5, rng);
  const auto gm = single_gaussian(mu, 0.5);
  const Eigen::VectorXd x1 = random_vector(5, rng), x2 = random_vector(5, rng);
  CHECK((gm_score(x1, gm) - (mu - x1) / 0.25).cwiseAbs().maxCoeff() < 1e-12);
  const double a = 0.3;
  const Eigen::VectorXd lhs = gm_score(a * x1 + (1 - a) * x2, gm);
  const Eigen::VectorXd rhs = a * gm_score(x1, gm) + (1 - a) * gm_score(x2, gm);
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("symmetric two-component mixture has zero score at the midpoint") {
  RandomStream rng(4, "gm");
  const Eigen::VectorXd a = random_vector(4, rng), b = random_vector(4, rng);
  const GaussianMixture gm{{0.5, 0.5}, {a, b}, {0.8, 0.8}};
  CHECK(gm_score(0.5 * (a + b), gm).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("gm_score matches central differences of gm_log_density") {
  RandomStream rng(5, "gm");
  const double h = 1e-5;
  for (int mixture = 0; mixture < 3; ++mixture) {
    const auto gm = random_mixture(2 + mixture, 6, rng);
    for (int point = 0; point < 20; ++point) {
      const Eigen::VectorXd x = random_vector(6, rng, 1.5);
      const Eigen::VectorXd s = gm_score(x, gm);
      Eigen::VectorXd fd(6);
      for (int k = 0; k < 6; ++k) {
        Eigen::VectorXd xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        fd[k] = (gm_log_density(xp, gm) - gm_log_density(xm, gm)) / (2 * h);
      }
      CHECK((fd - s).norm() <= 1e-5 * s.norm());
    }
  }
}

TEST_CASE("perturbed and marginal mixtures") {
  RandomStream rng(6, "gm");
  const auto gm = random_mixture(3, 6, rng);
  const auto p = gm.perturbed(0.5);
  for (std::size_t k = 0; k < gm.components(); ++k) {
    CHECK(p.stds[k] == doctest::Approx(std::sqrt(gm.stds[k] * gm.stds[k] + 0.25)));
  }
  const auto m = gm.marginal({1, 4});
  REQUIRE(m.dimension() == 2);
  CHECK(m.means[2][0] == gm.means[2][1]);
  CHECK(m.means[2][1] == gm.means[2][4]);

  // The marginal density equals the joint density integrated over the
  // dropped coordinate.
  const auto g2 = random_mixture(2, 2, rng);
  const auto g1 = g2.marginal({0});
  const double x0 = 0.3;
  double integral = 0.0;
  const int n = 4001;
  const double lo = -12.0, step = 24.0 / (n - 1);
  for (int i = 0; i < n; ++i) {
    const double w = (i == 0 || i == n - 1) ? 0.5 : 1.0;
    integral += w * std::exp(gm_log_density(Eigen::Vector2d(x0, lo + i * step), g2));
  }
  CHECK(std::log(integral * step) ==
        doctest::Approx(gm_log_density(Eigen::VectorXd::Constant(1, x0), g1)).epsilon(1e-8));
}

TEST_CASE("mixture validation, JSON and dimension errors") {
  RandomStream rng(7, "gm");
  const auto gm = random_mixture(2, 3, rng);
  const auto back = nlohmann::json(gm).get<GaussianMixture>();
  CHECK(back.weights == gm.weights);
  CHECK(back.stds == gm.stds);
  CHECK(back.means[1] == gm.means[1]);
  CHECK_THROWS_AS(gm_log_density(Eigen::VectorXd::Zero(4), gm), DimensionError);
  CHECK_THROWS_AS(gm_score(Eigen::VectorXd::Zero(2), gm), DimensionError);
  auto bad = gm;
  bad.weights[0] += 0.1;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
  bad = gm;
  bad.stds[1] = 0.0;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("stack and unstack are inverse") {
  RandomStream rng(8, "gm");
  const auto p = random_pair(4, rng);
  const auto x = stack(p);
  CHECK(x.size() == 48);
  CHECK(x[1] == p.pet(0, 1));
  CHECK(x[16 + 5] == p.mri(1, 1).real());
  CHECK(x[32 + 5] == p.mri(1, 1).imag());
  const auto q = unstack(x, 4, 4);
  CHECK(q.pet == p.pet);
  CHECK(q.mri == p.mri);
}

TEST_CASE("MixtureScore restricts to a modality through the marginal") {
  RandomStream rng(9, "gm");
  const auto gm = random_mixture(3, 3 * 4, rng);
  const auto x = random_pair(2, rng);
  const double sigma = 0.3;
  const auto joint = MixtureScore(gm).score(x, sigma);
  const auto expected = unstack(gm_score(stack(x), gm.perturbed(sigma)), 2, 2);
  CHECK((joint.pet - expected.pet).norm() < 1e-14);
  CHECK((joint.mri - expected.mri).norm() < 1e-14);

  const auto pet = MixtureScore(gm, Modality::pet).score(x, sigma);
  CHECK(pet.mri.isZero(0.0));
  const Eigen::VectorXd pet_expected =
      gm_score(stack(x).head(4), gm.marginal({0, 1, 2, 3}).perturbed(sigma));
  CHECK((pet.pet.reshaped<Eigen::RowMajor>() - pet_expected).norm() < 1e-14);

  const auto mri = MixtureScore(gm, Modality::mri).score(x, sigma);
  CHECK(mri.pet.isZero(0.0));
  const Eigen::VectorXd mri_expected = gm_score(
      stack(x).tail(8), gm.marginal({4, 5, 6, 7, 8, 9, 10, 11}).perturbed(sigma));
  CHECK(mri.mri(1, 0).real() == doctest::Approx(mri_expected[2]));
  CHECK(mri.mri(1, 0).imag() == doctest::Approx(mri_expected[6]));
}

TEST_CASE("fresh network outputs zero and preserves shape") {
  for (auto m : {Modality::joint, Modality::pet, Modality::mri}) {
    const auto params = init_score_net(m, NoiseSchedule{}, 3);
    RandomStream rng(10, "net");
    for (int size : {32, 64}) {
      const auto x = random_pair(size, rng);
      const auto s = score_net_forward(params, x, 0.7);
      CHECK(s.pet.rows() == size);
      CHECK(s.mri.cols() == size);
      CHECK(s.pet.isZero(0.0));
      CHECK(s.mri.isZero(0.0));
    }
  }
  const auto joint = init_score_net(Modality::joint, NoiseSchedule{}, 3);
  CHECK(joint.parameter_count() > 40000);
  CHECK(joint.parameter_count() < 70000);
  CHECK(joint.layers.front().in_channels == 4);
  CHECK(joint.layers.back().out_channels == 3);
}

TEST_CASE("network input validation") {
  const auto params = init_score_net(Modality::joint, NoiseSchedule{}, 3);
  CHECK_THROWS_AS(score_net_forward(params, ImagePair::zeros(30, 32), 0.5), DimensionError);
  CHECK_THROWS_AS(score_net_forward(params, ImagePair::zeros(32, 32), 0.0), ParameterError);
}

TEST_CASE("network loss gradient matches central differences on an 8x8 raster") {
  for (auto modality : {Modality::joint, Modality::pet, Modality::mri}) {
    auto params = init_score_net(modality, NoiseSchedule{}, 4);
    RandomStream rng(11, "fd");
    // Give the head random weights so every layer receives gradient.
    auto& head = params.layers.back();
    for (Eigen::Index k = 0; k < head.weight.size(); ++k) head.weight.data()[k] = 0.2 * rng.gaussian();
    const auto clean = random_pair(8, rng);
    const auto z = random_pair(8, rng);
    const double sigma = 0.4;

    Eigen::VectorXd grad;
    sample_dsm_loss(params, clean, z, sigma, &grad, NetPrecision::f64);
    const Eigen::VectorXd flat = flatten(params);
    REQUIRE(grad.size() == flat.size());
    const double h = 1e-5;
    for (int trial = 0; trial < 30; ++trial) {
      const auto k = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(flat.size())));
      auto plus = params, minus = params;
      Eigen::VectorXd fp = flat, fm = flat;
      fp[k] += h;
      fm[k] -= h;
      unflatten(plus, fp);
      unflatten(minus, fm);
      const double fd = (sample_dsm_loss(plus, clean, z, sigma, nullptr, NetPrecision::f64) -
                         sample_dsm_loss(minus, clean, z, sigma, nullptr, NetPrecision::f64)) /
                        (2 * h);
      CHECK(std::abs(fd - grad[k]) <= 1e-3 * std::abs(grad[k]) + 1e-8);
    }
  }
}

TEST_CASE("float and double network arithmetic agree") {
  auto params = init_score_net(Modality::joint, NoiseSchedule{}, 6);
  RandomStream rng(13, "precision");
  auto& head = params.layers.back();
  for (Eigen::Index k = 0; k < head.weight.size(); ++k) head.weight.data()[k] = 0.2 * rng.gaussian();
  const auto clean = random_pair(16, rng), z = random_pair(16, rng);
  Eigen::VectorXd g32, g64;
  const double l32 = sample_dsm_loss(params, clean, z, 0.5, &g32, NetPrecision::f32);
  const double l64 = sample_dsm_loss(params, clean, z, 0.5, &g64, NetPrecision::f64);
  CHECK(l32 == doctest::Approx(l64).epsilon(1e-5));
  CHECK((g32 - g64).norm() <= 1e-4 * g64.norm());
  const auto s32 = score_net_forward(params, clean, 0.5, NetPrecision::f32);
  const auto s64 = score_net_forward(params, clean, 0.5, NetPrecision::f64);
  CHECK((s32.pet - s64.pet).norm() <= 1e-5 * s64.pet.norm());
  CHECK((s32.mri - s64.mri).norm() <= 1e-5 * s64.mri.norm());
}

TEST_CASE("network forward is a pure function") {
  auto params = init_score_net(Modality::joint, NoiseSchedule{}, 5);
  RandomStream rng(12, "pure");
  for (Eigen::Index k = 0; k < params.layers.back().weight.size(); ++k) {
    params.layers.back().weight.data()[k] = 0.1 * rng.gaussian();
  }
  const auto x = random_pair(16, rng);
  const auto a = score_net_forward(params, x, 0.3);
  score_net_forward(params, random_pair(16, rng), 2.0);
  const auto b = score_net_forward(params, x, 0.3);
  CHECK(a.pet == b.pet);
  CHECK(a.mri == b.mri);
  CHECK_FALSE(a.pet.isZero(0.0));
}

TEST_CASE("dsm_loss is nonnegative, deterministic and near d for a zero network") {
  const auto params = init_score_net(Modality::joint, NoiseSchedule{}, 6);
  RandomStream rng(13, "dsm");
  std::vector<ImagePair> batch;
  for (int k = 0; k < 64; ++k) batch.push_back(random_pair(8, rng));
  const NetworkScore net(params);
  RandomStream s1(1, "loss"), s2(1, "loss");
  const double a = dsm_loss(net, batch, NoiseSchedule{}, s1);
  const double b = dsm_loss(net, batch, NoiseSchedule{}, s2);
  CHECK(a == b);
  CHECK(a >= 0.0);
  const double d = 3.0 * 64;
  CHECK(std::abs(a - d) < 0.05 * d);
  CHECK_THROWS_AS(dsm_loss(net, {}, NoiseSchedule{}, s1), ParameterError);
}

TEST_CASE("exact Gaussian score beats the zero network on Gaussian data") {
  RandomStream rng(14, "dsm-gauss");
  const int m = 4;
  const Eigen::VectorXd mu = random_vector(3 * m * m, rng, 0.5);
  const double tau = 0.3;
  std::vector<ImagePair> batch;
  for (int k = 0; k < 64; ++k) {
    batch.push_back(unstack(mu + tau * random_vector(3 * m * m, rng), m, m));
  }
  const MixtureScore exact(single_gaussian(mu, tau));
  const ZeroScore zero;
  RandomStream s1(2, "shared"), s2(2, "shared");
  const NoiseSchedule schedule;
  CHECK(dsm_loss(exact, batch, schedule, s1) < dsm_loss(zero, batch, schedule, s2));
}

TEST_CASE("training lowers the held-out loss and is bit-reproducible") {
  RandomStream rng(15, "train-data");
  PhantomSpec spec;
  spec.size = 16;
  std::vector<ImagePair> train, heldout;
  for (int k = 0; k < 24; ++k) train.push_back(make_phantom_pair(spec, rng));
  for (int k = 0; k < 8; ++k) heldout.push_back(make_phantom_pair(spec, rng));
  TrainConfig cfg;
  cfg.epochs = 4;
  cfg.batch_size = 8;
  cfg.widths = {8, 8, 8};
  cfg.seed = 21;
  const auto a = train_score(train, heldout, cfg);
  REQUIRE(a.log.size() == 5);
  CHECK(a.log[0].epoch == 0);
  CHECK(a.log.back().heldout_loss < a.log[0].heldout_loss);

  const auto b = train_score(train, heldout, cfg);
  CHECK(a.params == b.params);

  const auto dir = scratch_dir("checkpoint");
  save_checkpoint(a.params, dir / "a");
  save_checkpoint(b.params, dir / "b");
  CHECK(read_file(dir / "a" / "params.bin") == read_file(dir / "b" / "params.bin"));
  CHECK(read_file(dir / "a" / "params.json") == read_file(dir / "b" / "params.json"));
  const auto loaded = load_checkpoint(dir / "a");
  CHECK(loaded == a.params);
  const auto x = heldout.front();
  const auto sa = score_net_forward(a.params, x, 0.2);
  const auto sl = score_net_forward(loaded, x, 0.2);
  CHECK(sa.pet == sl.pet);
  CHECK(sa.mri == sl.mri);

  const auto csv = training_log_csv(a.log);
  CHECK(csv.rfind("epoch,train_loss,heldout_loss,wall_seconds\n", 0) == 0);
}

TEST_CASE("absurd learning rate aborts with a divergence error") {
  RandomStream rng(16, "train-data");
  PhantomSpec spec;
  spec.size = 16;
  std::vector<ImagePair> train;
  for (int k = 0; k < 8; ++k) train.push_back(make_phantom_pair(spec, rng));
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch_size = 4;
  cfg.widths = {4, 4, 4};
  cfg.learning_rate = 1e6;
  CHECK_THROWS_AS(train_score(train, {}, cfg), DivergenceError);
}

TEST_CASE("checkpoint errors") {
  const auto dir = scratch_dir("checkpoint_errors");
  CHECK_THROWS_AS(load_checkpoint(dir / "missing"), MissingInputError);
  const auto params = init_score_net(Modality::mri, NoiseSchedule{}, 1, {4, 4, 4});
  save_checkpoint(params, dir / "c");
  CHECK(load_checkpoint(dir / "c") == params);
  write_file(dir / "c" / "params.bin", "short");
  CHECK_THROWS_AS(load_checkpoint(dir / "c"), FormatError);
}
