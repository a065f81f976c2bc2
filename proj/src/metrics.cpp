#include "jointrecon/metrics.hpp"

#include <cmath>

namespace jointrecon {

double psnr(const RealGrid& x, const RealGrid& ref, double peak) {
  require_same_shape(x, ref, "psnr");
  if (!(peak > 0.0)) throw ParameterError("psnr: peak must be > 0");
  if (ref.size() == 0) throw DimensionError("psnr: empty image");
  const double mse = (x - ref).squaredNorm() / static_cast<double>(ref.size());
  if (mse < peak * peak * std::pow(10.0, -kPsnrCap / 10.0)) return kPsnrCap;
  return 10.0 * std::log10(peak * peak / mse);
}

double psnr(const ComplexGrid& x, const ComplexGrid& ref, double peak) {
  require_same_shape(x, ref, "psnr");
  return psnr(RealGrid(x.cwiseAbs()), RealGrid(ref.cwiseAbs()), peak);
}

double ssim(const RealGrid& x, const RealGrid& ref, std::optional<double> range) {
  require_same_shape(x, ref, "ssim");
  const Eigen::Index h = ref.rows(), w = ref.cols();
  if (h < kSsimWindow || w < kSsimWindow) {
    throw DimensionError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                         " is smaller than the 7x7 window");
  }
  double l = range.value_or(ref.maxCoeff() - ref.minCoeff());
  if (!(l > 0.0)) l = 1.0;
  const double c1 = (0.01 * l) * (0.01 * l), c2 = (0.03 * l) * (0.03 * l);
  const double n = kSsimWindow * kSsimWindow;
  double total = 0.0;
  for (Eigen::Index i = 0; i + kSsimWindow <= h; ++i) {
    for (Eigen::Index j = 0; j + kSsimWindow <= w; ++j) {
      const auto a = x.block(i, j, kSsimWindow, kSsimWindow).array();
      const auto b = ref.block(i, j, kSsimWindow, kSsimWindow).array();
      const double ma = a.sum() / n, mb = b.sum() / n;
      const double va = (a - ma).square().sum() / n;
      const double vb = (b - mb).square().sum() / n;
      const double cov = ((a - ma) * (b - mb)).sum() / n;
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
  }
  return total / static_cast<double>((h - kSsimWindow + 1) * (w - kSsimWindow + 1));
}

double ssim(const ComplexGrid& x, const ComplexGrid& ref, std::optional<double> range) {
  require_same_shape(x, ref, "ssim");
  return ssim(RealGrid(x.cwiseAbs()), RealGrid(ref.cwiseAbs()), range);
}

double nrmse(const RealGrid& x, const RealGrid& ref) {
  require_same_shape(x, ref, "nrmse");
  const double r = ref.norm();
  if (!(r > 0.0)) throw ParameterError("nrmse: reference has zero norm");
  return (x - ref).norm() / r;
}

double nrmse(const ComplexGrid& x, const ComplexGrid& ref) {
  require_same_shape(x, ref, "nrmse");
  const double r = ref.norm();
  if (!(r > 0.0)) throw ParameterError("nrmse: reference has zero norm");
  return (x - ref).norm() / r;
}

namespace {

ImageScores score_normalised(const RealGrid& estimate, const RealGrid& truth) {
  const double top = truth.maxCoeff();
  if (!(top > 0.0)) throw ParameterError("metrics: ground truth has no positive value");
  const RealGrid x = estimate / top, ref = truth / top;
  return {psnr(x, ref, 1.0), ssim(x, ref), nrmse(x, ref)};
}

}  // namespace

ImageScores score_pet(const RealGrid& estimate, const RealGrid& truth) {
  return score_normalised(estimate, truth);
}

ImageScores score_mri(const ComplexGrid& estimate, const ComplexGrid& truth) {
  require_same_shape(estimate, truth, "score_mri");
  return score_normalised(estimate.cwiseAbs(), truth.cwiseAbs());
}

}  // namespace jointrecon
