#pragma once

#include <optional>

#include "jointrecon/grid.hpp"

namespace jointrecon {

inline constexpr double kPsnrCap = 99.0;
inline constexpr int kSsimWindow = 7;

/// 10 log10(peak^2 / MSE), capped at 99 dB. Complex grids compare magnitudes.
double psnr(const RealGrid& x, const RealGrid& ref, double peak);
double psnr(const ComplexGrid& x, const ComplexGrid& ref, double peak);

/// Mean SSIM over every valid 7x7 window (uniform weights, population
/// moments), C1 = (0.01 L)^2, C2 = (0.03 L)^2. L defaults to the range of
/// ref, or 1 when ref is constant.
double ssim(const RealGrid& x, const RealGrid& ref, std::optional<double> range = std::nullopt);
double ssim(const ComplexGrid& x, const ComplexGrid& ref, std::optional<double> range = std::nullopt);

/// ||x - ref|| / ||ref||.
double nrmse(const RealGrid& x, const RealGrid& ref);
double nrmse(const ComplexGrid& x, const ComplexGrid& ref);

struct ImageScores {
  double psnr_db;
  double ssim;
  double nrmse;
};

/// PET: both images divided by max(truth), peak 1.
ImageScores score_pet(const RealGrid& estimate, const RealGrid& truth);
/// MRI: magnitudes divided by max |truth|, peak 1.
ImageScores score_mri(const ComplexGrid& estimate, const ComplexGrid& truth);

}  // namespace jointrecon
