#include "jointrecon/fourier.hpp"

#include <unsupported/Eigen/FFT>

#include <algorithm>
#include <cmath>

namespace jointrecon {

namespace {

enum class Direction { forward, inverse };

ComplexGrid centered_transform(const ComplexGrid& in, Direction dir) {
  const Eigen::Index h = in.rows();
  const Eigen::Index w = in.cols();
  ComplexGrid work(h, w);
  // ifftshift: move the image centre to the origin.
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) work(i, j) = in((i + h / 2) % h, (j + w / 2) % w);
  }

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  std::vector<Complex> src, dst;
  auto run = [&](std::vector<Complex>& d, const std::vector<Complex>& s) {
    if (s.size() == 1) {
      d = s;  // kissfft faults on length-1 transforms
    } else if (dir == Direction::forward) {
      fft.fwd(d, s);
    } else {
      fft.inv(d, s);
    }
  };

  src.resize(static_cast<std::size_t>(w));
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) src[static_cast<std::size_t>(j)] = work(i, j);
    run(dst, src);
    for (Eigen::Index j = 0; j < w; ++j) work(i, j) = dst[static_cast<std::size_t>(j)];
  }
  src.resize(static_cast<std::size_t>(h));
  for (Eigen::Index j = 0; j < w; ++j) {
    for (Eigen::Index i = 0; i < h; ++i) src[static_cast<std::size_t>(i)] = work(i, j);
    run(dst, src);
    for (Eigen::Index i = 0; i < h; ++i) work(i, j) = dst[static_cast<std::size_t>(i)];
  }

  // fftshift: move DC to the centre, and apply the unitary scale.
  const double scale = 1.0 / std::sqrt(static_cast<double>(h * w));
  ComplexGrid out(h, w);
  for (Eigen::Index i = 0; i < h; ++i) {
    for (Eigen::Index j = 0; j < w; ++j) {
      out((i + h / 2) % h, (j + w / 2) % w) = scale * work(i, j);
    }
  }
  return out;
}

void require_mask_shape(const SamplingMask& mask, Eigen::Index h, Eigen::Index w,
                        const char* what) {
  mask.validate();
  if (mask.height != h || mask.width != w) {
    throw DimensionError(std::string(what) + ": mask is " + std::to_string(mask.height) + "x" +
                         std::to_string(mask.width) + ", data is " + std::to_string(h) + "x" +
                         std::to_string(w));
  }
}

}  // namespace

int ceil_count(double x) {
  return static_cast<int>(std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))));
}

SamplingMask SamplingMask::full(int height, int width) {
  return {height, width, std::vector<bool>(static_cast<std::size_t>(width), true)};
}

int SamplingMask::kept_count() const {
  return static_cast<int>(std::count(kept.begin(), kept.end(), true));
}

std::vector<int> SamplingMask::kept_lines() const {
  std::vector<int> lines;
  for (int c = 0; c < width; ++c) {
    if (kept[static_cast<std::size_t>(c)]) lines.push_back(c);
  }
  return lines;
}

void SamplingMask::validate() const {
  if (height < 1 || width < 1) throw DimensionError("mask: empty raster");
  if (static_cast<int>(kept.size()) != width) throw DimensionError("mask: flag count != width");
  if (kept_count() < 1) throw ParameterError("mask: no line kept");
}

void to_json(nlohmann::json& j, const SamplingMask& m) {
  j = nlohmann::json{{"height", m.height}, {"width", m.width}, {"kept_lines", m.kept_lines()}};
}

void from_json(const nlohmann::json& j, SamplingMask& m) {
  j.at("height").get_to(m.height);
  j.at("width").get_to(m.width);
  if (m.width < 1) throw FormatError("mask.json: width must be >= 1");
  m.kept.assign(static_cast<std::size_t>(m.width), false);
  for (int line : j.at("kept_lines").get<std::vector<int>>()) {
    if (line < 0 || line >= m.width) throw FormatError("mask.json: line index out of range");
    m.kept[static_cast<std::size_t>(line)] = true;
  }
  m.validate();
}

ComplexGrid centered_fft2(const ComplexGrid& v) {
  return centered_transform(v, Direction::forward);
}

ComplexGrid centered_ifft2(const ComplexGrid& k) {
  return centered_transform(k, Direction::inverse);
}

KSpaceData fourier_forward(const ComplexGrid& v, const SamplingMask& mask) {
  require_mask_shape(mask, v.rows(), v.cols(), "fourier_forward");
  KSpaceData g{mask, centered_fft2(v)};
  mask.apply(g.data);
  return g;
}

ComplexGrid fourier_adjoint(const KSpaceData& g) {
  require_mask_shape(g.mask, g.data.rows(), g.data.cols(), "fourier_adjoint");
  ComplexGrid masked = g.data;
  g.mask.apply(masked);
  return centered_ifft2(masked);
}

SamplingMask make_cartesian_mask(int n, double accel, double center_fraction,
                                 RandomStream& stream, int height) {
  if (n < 1) throw ParameterError("mask: line count must be >= 1");
  if (!(accel >= 1.0)) throw ParameterError("mask: acceleration must be >= 1");
  if (!(center_fraction > 0.0 && center_fraction < 1.0)) {
    throw ParameterError("mask: center_fraction must lie in (0, 1)");
  }
  const int total = ceil_count(n / accel);
  const int center = ceil_count(n * center_fraction);
  if (center > total) {
    throw ParameterError("mask: ceil(n*center_fraction)=" + std::to_string(center) +
                         " exceeds ceil(n/accel)=" + std::to_string(total));
  }

  SamplingMask mask{height < 0 ? n : height, n, std::vector<bool>(static_cast<std::size_t>(n))};
  const int start = n / 2 - center / 2;
  for (int c = start; c < start + center; ++c) mask.kept[static_cast<std::size_t>(c)] = true;

  std::vector<int> pool;
  for (int c = 0; c < n; ++c) {
    if (!mask.kept[static_cast<std::size_t>(c)]) pool.push_back(c);
  }
  // Partial Fisher-Yates: the first (total - center) slots are the draw.
  for (int k = 0; k < total - center; ++k) {
    const auto pick = k + static_cast<int>(stream.below(pool.size() - static_cast<std::size_t>(k)));
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick)]);
    mask.kept[static_cast<std::size_t>(pool[static_cast<std::size_t>(k)])] = true;
  }
  return mask;
}

}  // namespace jointrecon
