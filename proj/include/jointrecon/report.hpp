#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "jointrecon/metrics.hpp"

namespace jointrecon {

// A run directory holds, per sample, truth_pet.jrg / truth_mri.jrg and one
// "<method>_<modality>.jrg" per result, under <run>/<sample id>/.

inline constexpr int kMontageGap = 2;
inline constexpr double kErrorGain = 5.0;

struct MetricRow {
  std::string sample;
  std::string method;
  std::string modality;  ///< "pet" or "mri"
  double psnr_db;
  double ssim;
  double nrmse;
};

struct SummaryRow {
  std::string method;
  std::string modality;
  std::string metric;  ///< psnr_db, ssim or nrmse
  double mean;
  double std;          ///< sample standard deviation, 0 when n = 1
  int n;
};

/// Scores every result found under the run directories, sorted by
/// (sample, method, modality). Throws ReportError when nothing is found,
/// when a result has no matching ground truth (listing every absentee) or
/// when two runs hold the same result.
std::vector<MetricRow> collect_metrics(const std::vector<std::filesystem::path>& runs);

std::vector<SummaryRow> summarize(const std::vector<MetricRow>& rows);

std::string metrics_csv(const std::vector<MetricRow>& rows);
std::string summary_csv(const std::vector<SummaryRow>& rows);
std::string summary_table(const std::vector<SummaryRow>& rows);

/// Width and height of a montage with the given panel grid.
inline int montage_extent(int panels, int tile) { return panels * tile + (panels + 1) * kMontageGap; }

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<unsigned char> pixels;  ///< row-major
};

void write_png(const GrayImage& image, const std::filesystem::path& path);
GrayImage read_png(const std::filesystem::path& path);

struct ReportFiles {
  std::vector<MetricRow> metrics;
  std::vector<SummaryRow> summary;
  std::vector<std::filesystem::path> written;
};

/// Writes metrics.csv, summary.csv and, per modality, montage_<modality>.png
/// with a montage_<modality>.json sidecar of per-panel display windows.
/// Montage rows: ground truth, each method, then |error| x 5 per method;
/// columns: samples. Images are normalised by the ground-truth maximum.
ReportFiles make_report(const std::vector<std::filesystem::path>& runs,
                        const std::filesystem::path& out);

}  // namespace jointrecon
