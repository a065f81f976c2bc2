#pragma once

#include <iostream>
#include <optional>
#include <string>

namespace jointrecon {

// Process exit codes; scripts rely on these staying fixed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitMissingInput = 3;
inline constexpr int kExitDiverged = 4;

/// Desk-scale experiment settings: Cartesian acceleration, expected sinogram
/// counts and the number of projection angles (detectors follow the image
/// size).
struct ExperimentPreset {
  const char* name;
  double accel;
  double counts_target;
  int n_angles;
};

/// reconstruct's PET data weight under the default EM step.
inline constexpr double kEmRelaxation = 0.05;

inline constexpr ExperimentPreset kPresets[] = {
    {"fig2", 3.0, 1e5, 60},
    {"fig3", 5.0, 1e5, 60},
    {"fig4", 4.0, 2e4, 60},
    {"fig5", 4.0, 2e4, 60},
};

std::optional<ExperimentPreset> find_preset(const std::string& name);

/// Entry point of the jointrecon command line:
///   jointrecon {phantom|train|reconstruct|evaluate|verify} [flags]
/// Returns the process exit code instead of exiting.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace jointrecon
