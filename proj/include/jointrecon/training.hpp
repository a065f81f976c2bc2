#pragma once

#include <functional>
#include <vector>

#include "jointrecon/dataset.hpp"
#include "jointrecon/score_net.hpp"

namespace jointrecon {

/// Draws a noise level index uniformly from 0..N and a standard normal z on
/// the modality's channels (the other channels stay zero).
struct DsmDraw {
  double sigma;
  ImagePair z;
};
DsmDraw draw_dsm_noise(Modality modality, Eigen::Index height, Eigen::Index width,
                       const NoiseSchedule& schedule, RandomStream& stream);

/// Mean over the batch of ||sigma * s(x + sigma z, sigma) + z||^2, with one
/// draw_dsm_noise per batch element in order.
double dsm_loss(const ScoreSource& source, const std::vector<ImagePair>& batch,
                const NoiseSchedule& schedule, RandomStream& stream);

/// Training aborts once a batch loss exceeds this multiple of the initial loss.
inline constexpr double kDivergenceGrowth = 1e6;

struct TrainConfig {
  int epochs = 30;
  int batch_size = 16;
  /// Step size for the loss divided by the number of modelled values per
  /// sample, so one rate suits every raster.
  double learning_rate = 0.2;
  double momentum = 0.9;
  /// Global gradient-norm clip on the per-value loss; 0 disables.
  double grad_clip = 1.0;
  bool augment = true;  ///< random horizontal and vertical flips
  Modality modality = Modality::joint;
  std::array<int, 3> widths{16, 32, 32};
  NoiseSchedule schedule;
  std::uint64_t seed = 0;
  int jobs = 1;

  void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);

struct EpochLog {
  int epoch;
  double train_loss;
  double heldout_loss;
  double wall_seconds;
};

struct TrainResult {
  ScoreNetParams params;
  std::vector<EpochLog> log;
};

/// Momentum SGD on the denoising loss over in-memory training pairs. Row 0 of
/// the log is measured before any update. Held-out loss uses one fixed
/// stream at every epoch. Throws DivergenceError on a non-finite or exploding loss.
TrainResult train_score(const std::vector<ImagePair>& train, const std::vector<ImagePair>& heldout,
                        const TrainConfig& cfg,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

/// Loads the dataset's train and test ground truths, then trains.
TrainResult train_score(const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::function<void(const EpochLog&)>& on_epoch = {});

std::vector<ImagePair> load_truths(const DatasetManifest& manifest, const std::string& split);

std::string training_log_csv(const std::vector<EpochLog>& log);

}  // namespace jointrecon
