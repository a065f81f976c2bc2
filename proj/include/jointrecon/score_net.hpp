#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "jointrecon/schedule.hpp"
#include "jointrecon/score_source.hpp"

namespace jointrecon {

/// 3x3 same-padded convolution. `weight` is out x (in * 9), column index
/// c * 9 + ky * 3 + kx.
struct ConvLayer {
  std::string name;
  int in_channels = 0;
  int out_channels = 0;
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;

  bool operator==(const ConvLayer&) const = default;
};

/// Three-scale encoder-decoder over (image channels + a log-sigma channel).
///
///   enc0, enc1     full resolution, widths[0]
///   enc2, enc3     half resolution, widths[1]
///   mid0, mid1     quarter resolution, widths[2]
///   dec1           half resolution, input = upsampled mid1 ++ enc3
///   dec0           full resolution, input = upsampled dec1 ++ enc1
///   head           full resolution -> image channels, zero-initialised
///
/// The network returns sigma * score; score_net_forward divides by sigma.
struct ScoreNetParams {
  Modality modality = Modality::joint;
  std::array<int, 3> widths{16, 32, 32};
  NoiseSchedule schedule;  ///< sigma range used to normalise the sigma channel
  std::uint64_t seed = 0;
  std::vector<ConvLayer> layers;

  std::size_t parameter_count() const;
  void validate() const;
  bool operator==(const ScoreNetParams&) const = default;
};

ScoreNetParams init_score_net(Modality modality, const NoiseSchedule& schedule, std::uint64_t seed,
                              std::array<int, 3> widths = {16, 32, 32});

/// Arithmetic used inside the network. Parameters are float32 values either
/// way; f64 exists for gradient checks.
enum class NetPrecision { f32, f64 };

/// Score estimate at noise level sigma. Height and width must be multiples of 4.
ImagePair score_net_forward(const ScoreNetParams& params, const ImagePair& noisy, double sigma,
                            NetPrecision precision = NetPrecision::f32);

/// Denoising loss ||sigma * s(x + sigma z, sigma) + z||^2 of one sample over
/// the modality's channels. When `grad` is non-null it receives the gradient
/// with respect to flatten(params).
double sample_dsm_loss(const ScoreNetParams& params, const ImagePair& clean, const ImagePair& z,
                       double sigma, Eigen::VectorXd* grad = nullptr,
                       NetPrecision precision = NetPrecision::f32);

/// All weights and biases in descriptor order (per layer: weight row-major,
/// then bias).
Eigen::VectorXd flatten(const ScoreNetParams& params);
void unflatten(ScoreNetParams& params, const Eigen::VectorXd& flat);

/// Rounds every parameter to the nearest float32 so checkpoints are exact.
void round_params_to_f32(ScoreNetParams& params);

/// Checkpoint: <dir>/params.json descriptor and <dir>/params.bin payload.
void save_checkpoint(const ScoreNetParams& params, const std::filesystem::path& dir);
ScoreNetParams load_checkpoint(const std::filesystem::path& dir);

class NetworkScore final : public ScoreSource {
 public:
  explicit NetworkScore(ScoreNetParams params) : params_(std::move(params)) { params_.validate(); }
  Modality modality() const override { return params_.modality; }
  ImagePair score(const ImagePair& x, double sigma) const override {
    return score_net_forward(params_, x, sigma);
  }
  const ScoreNetParams& params() const { return params_; }

 private:
  ScoreNetParams params_;
};

}  // namespace jointrecon
