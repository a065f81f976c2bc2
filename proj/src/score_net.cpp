#include "jointrecon/score_net.hpp"

#include <bit>
#include <cmath>

#include "jointrecon/grid_io.hpp"
#include "jointrecon/random.hpp"

namespace jointrecon {

namespace {

template <typename T>
using Act = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr int kLayers = 9;
constexpr double kDataScale = 0.5;  // rough std of clean phantom pixels
constexpr const char* kLayerNames[kLayers] = {"enc0", "enc1", "enc2", "enc3", "mid0",
                                              "mid1", "dec1", "dec0", "head"};

struct Shape {
  int h, w;
  int pixels() const { return h * w; }
  Shape half() const { return {h / 2, w / 2}; }
};

template <typename T>
Act<T> im2col(const Act<T>& x, Shape s) {
  Act<T> cols = Act<T>::Zero(x.rows() * 9, s.pixels());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int dy = ky - 1, dx = kx - 1;
        const int j0 = std::max(0, -dx), j1 = std::min(s.w, s.w - dx);
        const Eigen::Index row = c * 9 + ky * 3 + kx;
        for (int i = 0; i < s.h; ++i) {
          const int si = i + dy;
          if (si < 0 || si >= s.h) continue;
          cols.row(row).segment(i * s.w + j0, j1 - j0) =
              x.row(c).segment(si * s.w + j0 + dx, j1 - j0);
        }
      }
    }
  }
  return cols;
}

template <typename T>
Act<T> col2im(const Act<T>& dcols, Eigen::Index channels, Shape s) {
  Act<T> dx = Act<T>::Zero(channels, s.pixels());
  for (Eigen::Index c = 0; c < channels; ++c) {
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const int dy = ky - 1, dxo = kx - 1;
        const int j0 = std::max(0, -dxo), j1 = std::min(s.w, s.w - dxo);
        const Eigen::Index row = c * 9 + ky * 3 + kx;
        for (int i = 0; i < s.h; ++i) {
          const int si = i + dy;
          if (si < 0 || si >= s.h) continue;
          dx.row(c).segment(si * s.w + j0 + dxo, j1 - j0) +=
              dcols.row(row).segment(i * s.w + j0, j1 - j0);
        }
      }
    }
  }
  return dx;
}

template <typename T>
Act<T> pool(const Act<T>& x, Shape s) {
  const Shape o = s.half();
  Act<T> y(x.rows(), o.pixels());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (int i = 0; i < o.h; ++i) {
      for (int j = 0; j < o.w; ++j) {
        const int a = 2 * i * s.w + 2 * j;
        y(c, i * o.w + j) = T(0.25) * (x(c, a) + x(c, a + 1) + x(c, a + s.w) + x(c, a + s.w + 1));
      }
    }
  }
  return y;
}

template <typename T>
Act<T> pool_backward(const Act<T>& dy, Shape s) {
  const Shape o = s.half();
  Act<T> dx(dy.rows(), s.pixels());
  for (Eigen::Index c = 0; c < dy.rows(); ++c) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) dx(c, i * s.w + j) = T(0.25) * dy(c, (i / 2) * o.w + j / 2);
    }
  }
  return dx;
}

// Nearest-neighbour upsampling from s.half() to s.
template <typename T>
Act<T> upsample(const Act<T>& x, Shape s) {
  const Shape o = s.half();
  Act<T> y(x.rows(), s.pixels());
  for (Eigen::Index c = 0; c < x.rows(); ++c) {
    for (int i = 0; i < s.h; ++i) {
      for (int j = 0; j < s.w; ++j) y(c, i * s.w + j) = x(c, (i / 2) * o.w + j / 2);
    }
  }
  return y;
}

template <typename T>
Act<T> upsample_backward(const Act<T>& dy, Shape s) {
  return T(4) * pool(dy, s);
}

template <typename T>
Act<T> vcat(const Act<T>& a, const Act<T>& b) {
  Act<T> out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a;
  out.bottomRows(b.rows()) = b;
  return out;
}

template <typename T>
Act<T> silu(const Act<T>& z) {
  return z.unaryExpr([](T t) { return t / (T(1) + std::exp(-t)); });
}

template <typename T>
Act<T> silu_backward(const Act<T>& dy, const Act<T>& z) {
  return dy.binaryExpr(z, [](T g, T t) {
    const T s = T(1) / (T(1) + std::exp(-t));
    return g * s * (T(1) + t * (T(1) - s));
  });
}

// Layer parameters in the compute precision.
template <typename T>
struct Weights {
  Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic> weight;
  Eigen::Matrix<T, Eigen::Dynamic, 1> bias;
  int in_channels;
};

template <typename T>
std::vector<Weights<T>> cast_layers(const ScoreNetParams& p) {
  std::vector<Weights<T>> out;
  for (const auto& l : p.layers) {
    out.push_back({l.weight.cast<T>(), l.bias.cast<T>(), l.in_channels});
  }
  return out;
}

template <typename T>
Act<T> conv(const Weights<T>& layer, const Act<T>& cols) {
  Act<T> y(layer.weight.rows(), cols.cols());
  y.noalias() = layer.weight * cols;
  y.colwise() += layer.bias;
  return y;
}

template <typename T>
struct Cache {
  std::array<Act<T>, kLayers> cols;
  std::array<Act<T>, kLayers - 1> pre;
};

// Raw network output (sigma * score) for the encoded input x0.
template <typename T>
Act<T> run(const std::vector<Weights<T>>& L, const Act<T>& x0, Shape s0, Cache<T>* cache) {
  const Shape s1 = s0.half(), s2 = s1.half();
  auto layer = [&](int k, const Act<T>& in, Shape s, bool activate) {
    Act<T> cols = im2col(in, s);
    Act<T> z = conv(L[static_cast<std::size_t>(k)], cols);
    if (cache) cache->cols[static_cast<std::size_t>(k)] = std::move(cols);
    if (!activate) return z;
    Act<T> a = silu(z);
    if (cache) cache->pre[static_cast<std::size_t>(k)] = std::move(z);
    return a;
  };
  const Act<T> a1 = layer(0, x0, s0, true);
  const Act<T> e1 = layer(1, a1, s0, true);
  const Act<T> a3 = layer(2, pool(e1, s0), s1, true);
  const Act<T> e2 = layer(3, a3, s1, true);
  const Act<T> a5 = layer(4, pool(e2, s1), s2, true);
  const Act<T> a6 = layer(5, a5, s2, true);
  const Act<T> a7 = layer(6, vcat(upsample(a6, s1), e2), s1, true);
  const Act<T> a8 = layer(7, vcat(upsample(a7, s0), e1), s0, true);
  return layer(8, a8, s0, false);
}

// Layer offsets inside the flat parameter vector.
std::vector<Eigen::Index> layer_offsets(const ScoreNetParams& p) {
  std::vector<Eigen::Index> off;
  Eigen::Index at = 0;
  for (const auto& l : p.layers) {
    off.push_back(at);
    at += l.weight.size() + l.bias.size();
  }
  off.push_back(at);
  return off;
}

template <typename T>
void backward(const ScoreNetParams& p, const std::vector<Weights<T>>& L, const Cache<T>& cache,
              const Act<T>& dout, Shape s0, Eigen::VectorXd& grad) {
  const Shape s1 = s0.half(), s2 = s1.half();
  const auto off = layer_offsets(p);
  grad.setZero(off.back());

  // Accumulates the parameter gradient of layer k from dz and returns dInput.
  auto conv_back = [&](int k, const Act<T>& dz, Shape s) {
    const auto& l = L[static_cast<std::size_t>(k)];
    const auto& cols = cache.cols[static_cast<std::size_t>(k)];
    Act<T> dw = dz * cols.transpose();
    const Eigen::Index o = off[static_cast<std::size_t>(k)];
    grad.segment(o, dw.size()) = dw.template reshaped<Eigen::RowMajor>().template cast<double>();
    grad.segment(o + dw.size(), dz.rows()) = dz.rowwise().sum().template cast<double>();
    if (k == 0) return Act<T>();
    Act<T> dcols = l.weight.transpose() * dz;
    return col2im(dcols, l.in_channels, s);
  };
  auto act_back = [&](int k, const Act<T>& da) {
    return silu_backward(da, cache.pre[static_cast<std::size_t>(k)]);
  };

  const int w0 = p.widths[0], w1 = p.widths[1];
  const Act<T> dc1 = conv_back(8, dout, s0);
  const Act<T> dcat0 = conv_back(7, act_back(7, dc1), s0);
  const Act<T> de1_skip = dcat0.bottomRows(w0);
  const Act<T> dcat1 = conv_back(6, act_back(6, upsample_backward<T>(dcat0.topRows(w1), s0)), s1);
  const Act<T> de2_skip = dcat1.bottomRows(w1);
  const Act<T> d5 = conv_back(5, act_back(5, upsample_backward<T>(dcat1.topRows(p.widths[2]), s1)), s2);
  const Act<T> dp2 = conv_back(4, act_back(4, d5), s2);
  const Act<T> de2 = pool_backward(dp2, s1) + de2_skip;
  const Act<T> d3 = conv_back(3, act_back(3, de2), s1);
  const Act<T> dp1 = conv_back(2, act_back(2, d3), s1);
  const Act<T> de1 = pool_backward(dp1, s0) + de1_skip;
  const Act<T> d1 = conv_back(1, act_back(1, de1), s0);
  conv_back(0, act_back(0, d1), s0);
}

Shape check_input(const ScoreNetParams& p, const ImagePair& x, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ParameterError("score net: sigma must be > 0");
  if (p.layers.size() != kLayers) throw ParameterError("score net: parameters are not initialised");
  if (x.mri.rows() != x.pet.rows() || x.mri.cols() != x.pet.cols()) {
    throw DimensionError("score net: PET and MRI shapes differ");
  }
  const Shape s{static_cast<int>(x.height()), static_cast<int>(x.width())};
  if (s.h < 4 || s.w < 4 || s.h % 4 != 0 || s.w % 4 != 0) {
    throw DimensionError("score net: image sides must be positive multiples of 4 (got " +
                         std::to_string(s.h) + "x" + std::to_string(s.w) + ")");
  }
  return s;
}

// Image channels in network order, unscaled.
Act<double> image_rows(Modality m, const ImagePair& x) {
  Act<double> rows(image_channels(m), x.pet.size());
  int r = 0;
  if (covers_pet(m)) rows.row(r++) = x.pet.reshaped<Eigen::RowMajor>().transpose();
  if (covers_mri(m)) {
    rows.row(r++) = x.mri.real().reshaped<Eigen::RowMajor>().transpose();
    rows.row(r++) = x.mri.imag().reshaped<Eigen::RowMajor>().transpose();
  }
  return rows;
}

ImagePair from_rows(Modality m, const Act<double>& rows, Eigen::Index h, Eigen::Index w) {
  ImagePair out = ImagePair::zeros(h, w);
  int r = 0;
  if (covers_pet(m)) {
    for (Eigen::Index k = 0; k < out.pet.size(); ++k) out.pet.data()[k] = rows(r, k);
    ++r;
  }
  if (covers_mri(m)) {
    for (Eigen::Index k = 0; k < out.mri.size(); ++k) {
      out.mri.data()[k] = Complex(rows(r, k), rows(r + 1, k));
    }
  }
  return out;
}

Act<double> encode(const ScoreNetParams& p, const ImagePair& x, double sigma) {
  const Act<double> img = image_rows(p.modality, x);
  Act<double> x0(img.rows() + 1, img.cols());
  x0.topRows(img.rows()) = img / std::sqrt(kDataScale * kDataScale + sigma * sigma);
  const double lo = std::log(p.schedule.sigma_min), hi = std::log(p.schedule.sigma_max);
  x0.bottomRows(1).setConstant(2.0 * (std::log(sigma) - lo) / (hi - lo) - 1.0);
  return x0;
}

}  // namespace

std::size_t ScoreNetParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void ScoreNetParams::validate() const {
  schedule.validate();
  if (layers.size() != kLayers) throw ParameterError("score net: expected 9 layers");
  for (const auto& l : layers) {
    if (l.weight.rows() != l.out_channels || l.weight.cols() != 9 * l.in_channels ||
        l.bias.size() != l.out_channels) {
      throw ParameterError("score net: layer " + l.name + " has inconsistent shapes");
    }
    if (!l.weight.allFinite() || !l.bias.allFinite()) {
      throw ParameterError("score net: layer " + l.name + " has non-finite parameters");
    }
  }
  const int c = image_channels(modality);
  const std::array<std::pair<int, int>, kLayers> io{{{c + 1, widths[0]},
                                                     {widths[0], widths[0]},
                                                     {widths[0], widths[1]},
                                                     {widths[1], widths[1]},
                                                     {widths[1], widths[2]},
                                                     {widths[2], widths[2]},
                                                     {widths[2] + widths[1], widths[1]},
                                                     {widths[1] + widths[0], widths[0]},
                                                     {widths[0], c}}};
  for (int k = 0; k < kLayers; ++k) {
    const auto& l = layers[static_cast<std::size_t>(k)];
    if (l.in_channels != io[static_cast<std::size_t>(k)].first ||
        l.out_channels != io[static_cast<std::size_t>(k)].second) {
      throw ParameterError("score net: layer " + l.name + " does not match the widths");
    }
  }
}

ScoreNetParams init_score_net(Modality modality, const NoiseSchedule& schedule, std::uint64_t seed,
                              std::array<int, 3> widths) {
  schedule.validate();
  for (int w : widths) {
    if (w < 1) throw ParameterError("score net: widths must be >= 1");
  }
  ScoreNetParams p;
  p.modality = modality;
  p.widths = widths;
  p.schedule = schedule;
  p.seed = seed;
  const int c = image_channels(modality);
  const std::array<std::pair<int, int>, kLayers> io{{{c + 1, widths[0]},
                                                     {widths[0], widths[0]},
                                                     {widths[0], widths[1]},
                                                     {widths[1], widths[1]},
                                                     {widths[1], widths[2]},
                                                     {widths[2], widths[2]},
                                                     {widths[2] + widths[1], widths[1]},
                                                     {widths[1] + widths[0], widths[0]},
                                                     {widths[0], c}}};
  const RandomStream root(seed, "score-net/init");
  for (int k = 0; k < kLayers; ++k) {
    ConvLayer l;
    l.name = kLayerNames[k];
    l.in_channels = io[static_cast<std::size_t>(k)].first;
    l.out_channels = io[static_cast<std::size_t>(k)].second;
    l.weight = Eigen::MatrixXd::Zero(l.out_channels, 9 * l.in_channels);
    l.bias = Eigen::VectorXd::Zero(l.out_channels);
    if (k + 1 < kLayers) {
      auto rng = root.derive(l.name);
      const double scale = std::sqrt(2.0 / (9.0 * l.in_channels));
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) {
        for (Eigen::Index q = 0; q < l.weight.cols(); ++q) l.weight(r, q) = scale * rng.gaussian();
      }
    }
    p.layers.push_back(std::move(l));
  }
  round_params_to_f32(p);
  return p;
}

namespace {

template <typename T>
Act<double> forward_as(const ScoreNetParams& params, const ImagePair& noisy, double sigma, Shape s) {
  return run(cast_layers<T>(params), encode(params, noisy, sigma).cast<T>().eval(), s,
             static_cast<Cache<T>*>(nullptr))
      .template cast<double>();
}

template <typename T>
double dsm_loss_as(const ScoreNetParams& params, const ImagePair& noisy, const ImagePair& z,
                   double sigma, Shape s, Eigen::VectorXd* grad) {
  const auto layers = cast_layers<T>(params);
  Cache<T> cache;
  const Act<T> out = run(layers, encode(params, noisy, sigma).cast<T>().eval(), s, grad ? &cache : nullptr);
  const Act<double> residual = out.template cast<double>() + image_rows(params.modality, z);
  if (grad) backward(params, layers, cache, Act<T>((2.0 * residual).cast<T>()), s, *grad);
  return residual.squaredNorm();
}

}  // namespace

ImagePair score_net_forward(const ScoreNetParams& params, const ImagePair& noisy, double sigma,
                            NetPrecision precision) {
  const Shape s = check_input(params, noisy, sigma);
  const Act<double> out = precision == NetPrecision::f32 ? forward_as<float>(params, noisy, sigma, s)
                                                         : forward_as<double>(params, noisy, sigma, s);
  return from_rows(params.modality, out / sigma, noisy.height(), noisy.width());
}

double sample_dsm_loss(const ScoreNetParams& params, const ImagePair& clean, const ImagePair& z,
                       double sigma, Eigen::VectorXd* grad, NetPrecision precision) {
  const Shape s = check_input(params, clean, sigma);
  require_same_shape(clean.pet, z.pet, "sample_dsm_loss");
  const ImagePair noisy{clean.pet + sigma * z.pet, clean.mri + sigma * z.mri};
  return precision == NetPrecision::f32 ? dsm_loss_as<float>(params, noisy, z, sigma, s, grad)
                                        : dsm_loss_as<double>(params, noisy, z, sigma, s, grad);
}

Eigen::VectorXd flatten(const ScoreNetParams& params) {
  const auto off = layer_offsets(params);
  Eigen::VectorXd flat(off.back());
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    const auto& l = params.layers[k];
    flat.segment(off[k], l.weight.size()) = l.weight.reshaped<Eigen::RowMajor>();
    flat.segment(off[k] + l.weight.size(), l.bias.size()) = l.bias;
  }
  return flat;
}

void unflatten(ScoreNetParams& params, const Eigen::VectorXd& flat) {
  const auto off = layer_offsets(params);
  if (flat.size() != off.back()) throw DimensionError("unflatten: parameter count mismatch");
  for (std::size_t k = 0; k < params.layers.size(); ++k) {
    auto& l = params.layers[k];
    l.weight.reshaped<Eigen::RowMajor>() = flat.segment(off[k], l.weight.size());
    l.bias = flat.segment(off[k] + l.weight.size(), l.bias.size());
  }
}

void round_params_to_f32(ScoreNetParams& params) {
  auto f32 = [](double x) { return static_cast<double>(static_cast<float>(x)); };
  for (auto& l : params.layers) {
    l.weight = l.weight.unaryExpr(f32);
    l.bias = l.bias.unaryExpr(f32);
  }
}

void save_checkpoint(const ScoreNetParams& params, const std::filesystem::path& dir) {
  params.validate();
  nlohmann::ordered_json j;
  j["format"] = "jointrecon-score-net";
  j["version"] = 1;
  j["modality"] = to_string(params.modality);
  j["widths"] = params.widths;
  j["schedule"] = nlohmann::json(params.schedule);
  j["seed"] = params.seed;
  j["parameter_count"] = params.parameter_count();
  j["layers"] = nlohmann::json::array();
  for (const auto& l : params.layers) {
    j["layers"].push_back({{"name", l.name},
                           {"weight_shape", {l.out_channels, l.in_channels, 3, 3}},
                           {"bias_shape", {l.out_channels}}});
  }
  write_file(dir / "params.json", j.dump(2) + "\n");

  const auto flat = flatten(params);
  std::string bin;
  bin.reserve(4 * static_cast<std::size_t>(flat.size()));
  for (Eigen::Index k = 0; k < flat.size(); ++k) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(flat[k]));
    for (int shift = 0; shift < 32; shift += 8) bin.push_back(static_cast<char>((bits >> shift) & 0xFFu));
  }
  write_file(dir / "params.bin", bin);
}

ScoreNetParams load_checkpoint(const std::filesystem::path& dir) {
  if (!std::filesystem::exists(dir / "params.json") || !std::filesystem::exists(dir / "params.bin")) {
    throw MissingInputError("checkpoint not found in " + dir.string());
  }
  ScoreNetParams p;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "params.json"));
    if (j.at("format") != "jointrecon-score-net" || j.at("version") != 1) {
      throw FormatError(dir.string() + ": unsupported checkpoint format");
    }
    p = init_score_net(parse_modality(j.at("modality").get<std::string>()),
                       j.at("schedule").get<NoiseSchedule>(), j.at("seed").get<std::uint64_t>(),
                       j.at("widths").get<std::array<int, 3>>());
    if (j.at("parameter_count").get<std::size_t>() != p.parameter_count()) {
      throw FormatError(dir.string() + ": parameter count does not match the widths");
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError((dir / "params.json").string() + ": " + e.what());
  }
  const auto bin = read_file(dir / "params.bin");
  const auto n = static_cast<Eigen::Index>(p.parameter_count());
  if (bin.size() != 4 * static_cast<std::size_t>(n)) {
    throw FormatError((dir / "params.bin").string() + ": expected " + std::to_string(4 * n) +
                      " bytes, found " + std::to_string(bin.size()));
  }
  Eigen::VectorXd flat(n);
  const auto* b = reinterpret_cast<const unsigned char*>(bin.data());
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto* q = b + 4 * k;
    const std::uint32_t bits = static_cast<std::uint32_t>(q[0]) | (static_cast<std::uint32_t>(q[1]) << 8) |
                               (static_cast<std::uint32_t>(q[2]) << 16) |
                               (static_cast<std::uint32_t>(q[3]) << 24);
    flat[k] = static_cast<double>(std::bit_cast<float>(bits));
  }
  unflatten(p, flat);
  p.validate();
  return p;
}

}  // namespace jointrecon
