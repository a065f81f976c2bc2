#include <doctest.h>

#include <sstream>

#include "jointrecon/cli.hpp"
#include "jointrecon/dataset.hpp"
#include "jointrecon/grid_io.hpp"
#include "jointrecon/run_manifest.hpp"
#include "posterior_oracle.hpp"
#include "test_support.hpp"

using namespace jointrecon;
using namespace jointrecon::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code;
  std::string out, err;
};

Outcome cli(std::vector<std::string> args) {
  args.insert(args.begin(), "jointrecon");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string p(const fs::path& path) { return path.string(); }

nlohmann::json read_json(const fs::path& path) { return nlohmann::json::parse(read_file(path)); }

}  // namespace

TEST_CASE("usage errors exit with 2") {
  CHECK(cli({}).code == kExitUsage);
  CHECK(cli({"phantom", "--size", "32"}).code == kExitUsage);
  CHECK(cli({"bogus"}).code == kExitUsage);
  CHECK(cli({"--help"}).code == kExitOk);
  CHECK(cli({"reconstruct", "--data", "x", "--method", "magic", "--out", "y"}).code == kExitUsage);

  const auto dir = scratch_dir("cli_usage");
  const auto small = cli({"phantom", "--size", "8", "--out", p(dir / "d")});
  CHECK(small.code == kExitUsage);
  CHECK(small.err.find("size must be >= 16") != std::string::npos);
  CHECK(cli({"phantom", "--size", "16", "--sino-raster", "16by8", "--out", p(dir / "e")}).code == kExitUsage);
}

TEST_CASE("phantom is deterministic, refuses to overwrite and verifies") {
  const auto dir = scratch_dir("cli_phantom");
  const std::vector<std::string> base = {"phantom", "--size", "16", "--train", "3", "--test", "2", "--seed", "7"};
  auto with_out = [&](const fs::path& out, std::vector<std::string> extra = {}) {
    auto args = base;
    args.push_back("--out");
    args.push_back(p(out));
    args.insert(args.end(), extra.begin(), extra.end());
    return cli(args);
  };
  const auto first = with_out(dir / "a");
  REQUIRE(first.code == kExitOk);
  CHECK(first.out.find("manifest.json") != std::string::npos);
  REQUIRE(with_out(dir / "b").code == kExitOk);
  const auto ha = read_run_manifest(dir / "a").content_hash;
  CHECK(ha == read_run_manifest(dir / "b").content_hash);
  CHECK(ha == content_hash(dir / "a"));

  CHECK(with_out(dir / "a").code == kExitUsage);
  CHECK(with_out(dir / "a", {"--force"}).code == kExitOk);
  CHECK(read_run_manifest(dir / "a").content_hash == ha);

  CHECK(verify_run_manifest(dir / "a").empty());
  CHECK(cli({"verify", p(dir / "a"), p(dir / "b")}).code == kExitOk);
  write_file(dir / "a/test/0000/pet.jrg", "tampered");
  CHECK(verify_run_manifest(dir / "a") == std::vector<std::string>{"test/0000/pet.jrg"});
  CHECK(cli({"verify", p(dir / "a")}).code == kExitFailure);

  const auto m = read_run_manifest(dir / "b");
  CHECK(m.master_seed == 7);
  CHECK(m.config["size"] == 16);
  CHECK(m.command.at(1) == "phantom");
}

TEST_CASE("config file supplies flags and the command line wins") {
  const auto dir = scratch_dir("cli_config");
  write_file(dir / "run.cfg", "size = 16\ntrain = 2\ntest = 1\nseed = 3\npreset = \"fig3\"\n");
  REQUIRE(cli({"phantom", "--config", p(dir / "run.cfg"), "--seed", "4", "--out", p(dir / "d")}).code == kExitOk);
  const auto m = read_run_manifest(dir / "d");
  CHECK(m.master_seed == 4);
  CHECK(m.config["train"] == 2);
  CHECK(m.config["preset"] == "fig3");
  CHECK(load_manifest(dir / "d").config["acquisition"]["accel"] == 5.0);

  write_file(dir / "bad.cfg", "sizes = 16\n");
  CHECK(cli({"phantom", "--config", p(dir / "bad.cfg"), "--out", p(dir / "e")}).code == kExitUsage);
  CHECK(cli({"phantom", "--config", p(dir / "none.cfg"), "--out", p(dir / "e")}).code == kExitMissingInput);
}

TEST_CASE("train writes a reproducible checkpoint and maps failures to exit codes") {
  const auto dir = scratch_dir("cli_train");
  REQUIRE(cli({"phantom", "--size", "16", "--train", "16", "--test", "4", "--seed", "2", "--out", p(dir / "d")}).code == kExitOk);
  const std::vector<std::string> args = {"train", "--data", p(dir / "d"), "--epochs", "2", "--seed", "9"};
  auto a = args, b = args;
  a.insert(a.end(), {"--out", p(dir / "ck1")});
  b.insert(b.end(), {"--out", p(dir / "ck2")});
  REQUIRE(cli(a).code == kExitOk);
  REQUIRE(cli(b).code == kExitOk);
  CHECK(fs::exists(dir / "ck1/params.bin"));
  const auto loss = read_file(dir / "ck1/loss.csv");
  CHECK(std::count(loss.begin(), loss.end(), '\n') == 4);
  CHECK(artifact_hash(dir / "ck1/params.bin") == artifact_hash(dir / "ck2/params.bin"));
  CHECK(read_run_manifest(dir / "ck1").inputs.at("dataset") == content_hash(dir / "d"));

  CHECK(cli({"train", "--data", p(dir / "missing"), "--out", p(dir / "ck3")}).code == kExitMissingInput);
  const auto blown = cli({"train", "--data", p(dir / "d"), "--epochs", "3", "--lr", "1e6", "--out", p(dir / "ck4")});
  CHECK(blown.code == kExitDiverged);
  CHECK(blown.err.find("lower the learning rate") != std::string::npos);
}

TEST_CASE("reconstruct methods, priors and presets") {
  const auto dir = scratch_dir("cli_reconstruct");
  REQUIRE(cli({"phantom", "--size", "16", "--train", "2", "--test", "2", "--seed", "5", "--out", p(dir / "d")}).code == kExitOk);
  const auto data = p(dir / "d");

  REQUIRE(cli({"reconstruct", "--data", data, "--method", "zerofill", "--out", p(dir / "zf")}).code == kExitOk);
  CHECK(fs::exists(dir / "zf/test/0000/zerofill_mri.jrg"));
  CHECK(fs::exists(dir / "zf/test/0001/truth_pet.jrg"));

  CHECK(cli({"reconstruct", "--data", data, "--method", "joint", "--out", p(dir / "j")}).code == kExitMissingInput);
  CHECK(cli({"reconstruct", "--data", data, "--method", "joint", "--checkpoint", p(dir / "nope"), "--out",
             p(dir / "j")}).code == kExitMissingInput);
  CHECK(cli({"reconstruct", "--data", data, "--split", "val", "--method", "mlem", "--out", p(dir / "v")}).code ==
        kExitMissingInput);
  REQUIRE(cli({"train", "--data", data, "--epochs", "1", "--modality", "pet", "--out", p(dir / "ckp")}).code == kExitOk);
  const auto wrong = cli({"reconstruct", "--data", data, "--method", "joint", "--checkpoint", p(dir / "ckp"),
                          "--out", p(dir / "j")});
  CHECK(wrong.code == kExitUsage);
  CHECK(wrong.err.find("expected joint") != std::string::npos);

  REQUIRE(find_preset("fig2").has_value());
  CHECK(find_preset("fig2")->accel == 3.0);
  CHECK(find_preset("fig3")->accel == 5.0);
  CHECK(find_preset("fig4")->accel == 4.0);
  CHECK(!find_preset("fig9").has_value());
  for (const auto& preset : kPresets) {
    const auto out = dir / (std::string("preset_") + preset.name);
    REQUIRE(cli({"reconstruct", "--data", data, "--method", "zerofill", "--preset", preset.name, "--out", p(out)})
                .code == kExitOk);
    const auto measured = read_json(out / "test/0000/measurement.json");
    CHECK(measured["acquisition"]["accel"] == preset.accel);
    CHECK(measured["acquisition"]["counts_target"] == preset.counts_target);
    CHECK(measured["geometry"]["angles"].size() == static_cast<std::size_t>(preset.n_angles));
    const auto mask = measured["mask"].get<SamplingMask>();
    CHECK(mask.kept_count() == ceil_count(16.0 / preset.accel));
  }
  REQUIRE(cli({"reconstruct", "--data", data, "--method", "mlem", "--sino-raster", "24x30", "--out",
               p(dir / "raster")}).code == kExitOk);
  const auto geom = read_json(dir / "raster/test/0000/measurement.json")["geometry"].get<RadonGeometry>();
  CHECK(geom.n_detectors == 24);
  CHECK(geom.n_angles() == 30);
}

TEST_CASE("joint reconstruction with the mixture oracle on the two-pixel problem") {
  const PixelProblem problem;
  const auto dir = scratch_dir("cli_oracle");
  Sample s;
  s.truth = ImagePair::zeros(1, 1);
  s.truth.pet(0, 0) = 1.5;
  s.sinogram = problem.sinogram();
  s.kspace = problem.kspace();
  save_sample(s, dir / "pixel");
  write_file(dir / "gm.json", nlohmann::json(problem.prior).dump());

  const auto cfg = problem.sampler();
  const auto r = cli({"reconstruct", "--sample", p(dir / "pixel"), "--method", "joint", "--oracle-gm",
                      p(dir / "gm.json"), "--sigma-max", std::to_string(cfg.schedule.sigma_max), "--levels",
                      std::to_string(cfg.schedule.n_steps), "--steps-per-level",
                      std::to_string(cfg.steps_per_level), "--step-scale", std::to_string(cfg.step_scale),
                      "--lambda-mri", std::to_string(cfg.dc_weight_mri), "--pet-step", "gradient",
                      "--lambda-pet", std::to_string(cfg.dc_weight_pet), "--average", "400", "--out",
                      p(dir / "out")});
  REQUIRE(r.code == kExitOk);
  const double u = load_real_grid(dir / "out/pixel/joint_pet.jrg")(0, 0);
  const Complex v = load_complex_grid(dir / "out/pixel/joint_mri.jrg")(0, 0);
  const Eigen::Vector3d oracle = problem.posterior_mean(121);
  const Eigen::Vector3d got(u, v.real(), v.imag());
  CHECK((got - oracle).norm() <= 0.05 * oracle.norm());
}

TEST_CASE("evaluate exit codes and byte-stable output") {
  const auto dir = scratch_dir("cli_evaluate");
  CHECK(cli({"evaluate", "--out", p(dir / "r")}).code == kExitUsage);
  CHECK(cli({"evaluate", p(dir / "missing"), "--out", p(dir / "r")}).code == kExitMissingInput);
  fs::create_directories(dir / "empty");
  CHECK(cli({"evaluate", p(dir / "empty"), "--out", p(dir / "r")}).code == kExitUsage);

  REQUIRE(cli({"phantom", "--size", "16", "--test", "3", "--out", p(dir / "d")}).code == kExitOk);
  REQUIRE(cli({"reconstruct", "--data", p(dir / "d"), "--method", "mlem", "--out", p(dir / "pet")}).code == kExitOk);
  REQUIRE(cli({"reconstruct", "--data", p(dir / "d"), "--method", "zerofill,tvcs", "--out", p(dir / "mri")}).code ==
          kExitOk);
  const auto first = cli({"evaluate", p(dir / "pet"), p(dir / "mri"), "--out", p(dir / "r1")});
  REQUIRE(first.code == kExitOk);
  CHECK(first.out.find("zerofill") != std::string::npos);
  REQUIRE(cli({"evaluate", p(dir / "pet"), p(dir / "mri"), "--out", p(dir / "r2")}).code == kExitOk);
  for (const char* f : {"metrics.csv", "summary.csv", "montage_pet.png", "montage_mri.png"}) {
    CHECK(read_file(dir / "r1" / f) == read_file(dir / "r2" / f));
  }
  const auto summary = read_file(dir / "r1/summary.csv");
  CHECK(std::count(summary.begin(), summary.end(), '\n') == 1 + 3 * 3);
  CHECK(cli({"evaluate", p(dir / "pet"), "--out", p(dir / "r1")}).code == kExitUsage);
}

TEST_CASE("smoke pipeline on a 32x32 five-sample dataset") {
  const auto dir = scratch_dir("cli_smoke");
  auto pipeline = [&](const fs::path& root, const std::string& jobs) {
    const auto data = p(root / "data");
    REQUIRE(cli({"phantom", "--size", "32", "--train", "3", "--test", "2", "--seed", "11", "--out", data}).code == kExitOk);
    for (const char* m : {"joint", "pet", "mri"}) {
      REQUIRE(cli({"train", "--data", data, "--modality", m, "--epochs", "2", "--seed", "1", "--out",
                   p(root / (std::string("ck_") + m))}).code == kExitOk);
    }
    REQUIRE(cli({"reconstruct", "--data", data, "--method", "joint,single-pet,single-mri,mlem,tvcs,zerofill",
                 "--checkpoint", p(root / "ck_joint"), "--pet-checkpoint", p(root / "ck_pet"), "--mri-checkpoint",
                 p(root / "ck_mri"), "--levels", "20", "--jobs", jobs, "--seed", "1", "--out", p(root / "run")})
                .code == kExitOk);
    REQUIRE(cli({"evaluate", p(root / "run"), "--out", p(root / "report")}).code == kExitOk);
    return read_file(root / "report/metrics.csv");
  };
  const auto a = pipeline(dir / "a", "1");
  const auto b = pipeline(dir / "b", "2");
  CHECK(a == b);
  CHECK(std::count(a.begin(), a.end(), '\n') == 1 + 2 * 7);
}
