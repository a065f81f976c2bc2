#include "jointrecon/training.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <sstream>

#include "jointrecon/parallel.hpp"

namespace jointrecon {

namespace {

ImagePair flipped(const ImagePair& p, bool horizontal, bool vertical) {
  ImagePair out = p;
  if (horizontal) {
    out.pet = out.pet.rowwise().reverse().eval();
    out.mri = out.mri.rowwise().reverse().eval();
  }
  if (vertical) {
    out.pet = out.pet.colwise().reverse().eval();
    out.mri = out.mri.colwise().reverse().eval();
  }
  return out;
}

std::string fmt(double x) {
  std::ostringstream s;
  s.precision(17);
  s << x;
  return s.str();
}

}  // namespace

void TrainConfig::validate() const {
  schedule.validate();
  if (epochs < 1) throw ParameterError("train: epochs must be >= 1");
  if (batch_size < 1) throw ParameterError("train: batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw ParameterError("train: learning rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ParameterError("train: momentum must lie in [0, 1)");
  if (!(grad_clip >= 0.0)) throw ParameterError("train: grad_clip must be >= 0");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"epochs", c.epochs},
                     {"batch_size", c.batch_size},
                     {"learning_rate", c.learning_rate},
                     {"momentum", c.momentum},
                     {"grad_clip", c.grad_clip},
                     {"augment", c.augment},
                     {"modality", to_string(c.modality)},
                     {"widths", c.widths},
                     {"schedule", c.schedule},
                     {"seed", c.seed}};
}

DsmDraw draw_dsm_noise(Modality modality, Eigen::Index height, Eigen::Index width,
                       const NoiseSchedule& schedule, RandomStream& stream) {
  const int level = static_cast<int>(stream.below(static_cast<std::uint64_t>(schedule.n_steps) + 1));
  DsmDraw d{sigma_at(level, schedule), ImagePair::zeros(height, width)};
  if (covers_pet(modality)) {
    for (Eigen::Index k = 0; k < d.z.pet.size(); ++k) d.z.pet.data()[k] = stream.gaussian();
  }
  if (covers_mri(modality)) {
    for (Eigen::Index k = 0; k < d.z.mri.size(); ++k) {
      const double re = stream.gaussian();
      d.z.mri.data()[k] = Complex(re, stream.gaussian());
    }
  }
  return d;
}

double dsm_loss(const ScoreSource& source, const std::vector<ImagePair>& batch,
                const NoiseSchedule& schedule, RandomStream& stream) {
  if (batch.empty()) throw ParameterError("dsm_loss: empty batch");
  const Modality m = source.modality();
  double total = 0.0;
  for (const auto& x : batch) {
    const auto d = draw_dsm_noise(m, x.height(), x.width(), schedule, stream);
    const ImagePair noisy{x.pet + d.sigma * d.z.pet, x.mri + d.sigma * d.z.mri};
    const ImagePair s = source.score(noisy, d.sigma);
    double r = 0.0;
    if (covers_pet(m)) r += (d.sigma * s.pet + d.z.pet).squaredNorm();
    if (covers_mri(m)) r += (d.sigma * s.mri + d.z.mri).squaredNorm();
    total += r;
  }
  return total / static_cast<double>(batch.size());
}

TrainResult train_score(const std::vector<ImagePair>& train, const std::vector<ImagePair>& heldout,
                        const TrainConfig& cfg, const std::function<void(const EpochLog&)>& on_epoch) {
  cfg.validate();
  if (train.empty()) throw ParameterError("train: no training pairs");
  const auto start = std::chrono::steady_clock::now();
  auto elapsed = [&] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };

  TrainResult result;
  result.params = init_score_net(cfg.modality, cfg.schedule, cfg.seed, cfg.widths);
  auto& params = result.params;
  const Eigen::Index h = train.front().height(), w = train.front().width();
  const double values_per_sample = static_cast<double>(image_channels(cfg.modality) * h * w);

  const RandomStream root(cfg.seed, "train");
  auto heldout_loss = [&] {
    if (heldout.empty()) return std::nan("");
    auto s = root.derive("heldout");
    return dsm_loss(NetworkScore(params), heldout, cfg.schedule, s);
  };
  auto record = [&](EpochLog row) {
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
  };
  {
    auto s = root.derive("epoch-0");
    record({0, dsm_loss(NetworkScore(params), train, cfg.schedule, s), heldout_loss(), elapsed()});
  }
  const double blowup = kDivergenceGrowth * result.log.front().train_loss;

  Eigen::VectorXd flat = flatten(params);
  Eigen::VectorXd velocity = Eigen::VectorXd::Zero(flat.size());
  const std::size_t n = train.size();
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto epoch_stream = root.derive("epoch-" + std::to_string(epoch));
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    auto shuffle = epoch_stream.derive("shuffle");
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[shuffle.below(i)]);

    double epoch_total = 0.0;
    for (std::size_t b0 = 0, b = 0; b0 < n; b0 += batch, ++b) {
      const std::size_t count = std::min(batch, n - b0);
      auto stream = epoch_stream.derive("batch-" + std::to_string(b));
      std::vector<ImagePair> clean(count);
      std::vector<DsmDraw> draws;
      for (std::size_t k = 0; k < count; ++k) {
        const auto& x = train[order[b0 + k]];
        bool fh = false, fv = false;
        if (cfg.augment) {
          fh = stream.below(2) == 1;
          fv = stream.below(2) == 1;
        }
        clean[k] = flipped(x, fh, fv);
        draws.push_back(draw_dsm_noise(cfg.modality, h, w, cfg.schedule, stream));
      }
      std::vector<Eigen::VectorXd> grads(count);
      std::vector<double> losses(count);
      parallel_for(count, cfg.jobs, [&](std::size_t k) {
        losses[k] = sample_dsm_loss(params, clean[k], draws[k].z, draws[k].sigma, &grads[k]);
      });
      double loss = 0.0;
      Eigen::VectorXd g = Eigen::VectorXd::Zero(flat.size());
      for (std::size_t k = 0; k < count; ++k) {
        loss += losses[k];
        g += grads[k];
      }
      epoch_total += loss;
      loss /= static_cast<double>(count);
      g /= static_cast<double>(count) * values_per_sample;
      if (!std::isfinite(loss) || !g.allFinite()) {
        throw DivergenceError("train: non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + " (loss = " + fmt(loss) +
                              "); lower the learning rate");
      }
      if (loss > blowup) {
        throw DivergenceError("train: loss exploded at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + " (loss = " + fmt(loss) + ", initial " +
                              fmt(result.log.front().train_loss) + "); lower the learning rate");
      }
      if (cfg.grad_clip > 0.0) {
        const double norm = g.norm();
        if (norm > cfg.grad_clip) g *= cfg.grad_clip / norm;
      }
      velocity = cfg.momentum * velocity - cfg.learning_rate * g;
      flat += velocity;
      flat = flat.unaryExpr([](double x) { return static_cast<double>(static_cast<float>(x)); });
      if (!flat.allFinite()) {
        throw DivergenceError("train: parameters became non-finite at epoch " + std::to_string(epoch) +
                              ", batch " + std::to_string(b) + "; lower the learning rate");
      }
      unflatten(params, flat);
    }
    const double held = heldout_loss();
    if (!heldout.empty() && !std::isfinite(held)) {
      throw DivergenceError("train: non-finite held-out loss after epoch " + std::to_string(epoch));
    }
    record({epoch, epoch_total / static_cast<double>(n), held, elapsed()});
  }
  return result;
}

std::vector<ImagePair> load_truths(const DatasetManifest& manifest, const std::string& split) {
  std::vector<ImagePair> out;
  for (const auto& rec : manifest.split(split)) out.push_back(load_sample(manifest.sample_dir(rec)).truth);
  return out;
}

TrainResult train_score(const DatasetManifest& manifest, const TrainConfig& cfg,
                        const std::function<void(const EpochLog&)>& on_epoch) {
  return train_score(load_truths(manifest, "train"), load_truths(manifest, "test"), cfg, on_epoch);
}

std::string training_log_csv(const std::vector<EpochLog>& log) {
  std::ostringstream out;
  out << "epoch,train_loss,heldout_loss,wall_seconds\n";
  for (const auto& r : log) {
    out << r.epoch << ',' << fmt(r.train_loss) << ',' << fmt(r.heldout_loss) << ',' << r.wall_seconds
        << '\n';
  }
  return out.str();
}

}  // namespace jointrecon
