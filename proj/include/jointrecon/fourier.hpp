#pragma once

#include <vector>

#include <json.hpp>

#include "jointrecon/grid.hpp"
#include "jointrecon/random.hpp"

namespace jointrecon {

/// Cartesian phase-encode mask: one flag per k-space column, constant along
/// the readout (row) direction. The centre column holds DC after centring.
struct SamplingMask {
  int height = 0;
  int width = 0;
  std::vector<bool> kept;

  static SamplingMask full(int height, int width);

  int kept_count() const;
  std::vector<int> kept_lines() const;
  int center_line() const { return width / 2; }
  void validate() const;

  /// Zeroes every entry in a dropped column.
  template <typename Derived>
  void apply(Eigen::MatrixBase<Derived>& k) const {
    for (int c = 0; c < width; ++c) {
      if (!kept[static_cast<std::size_t>(c)]) k.col(c).setZero();
    }
  }

  bool operator==(const SamplingMask&) const = default;
};

void to_json(nlohmann::json& j, const SamplingMask& m);
void from_json(const nlohmann::json& j, SamplingMask& m);

/// MRI measurement g: masked k-space, identically zero outside the mask.
struct KSpaceData {
  SamplingMask mask;
  ComplexGrid data;
};

/// Centred unitary 2-D DFT (1/sqrt(H W) overall) followed by the mask.
KSpaceData fourier_forward(const ComplexGrid& v, const SamplingMask& mask);

/// Exact adjoint of fourier_forward: mask, then the centred unitary inverse DFT.
ComplexGrid fourier_adjoint(const KSpaceData& g);

/// Unmasked centred unitary transforms.
ComplexGrid centered_fft2(const ComplexGrid& v);
ComplexGrid centered_ifft2(const ComplexGrid& k);

/// Keeps ceil(n / accel) of n lines: the ceil(n * center_fraction) lines
/// around the centre, plus the rest drawn uniformly without replacement.
SamplingMask make_cartesian_mask(int n, double accel, double center_fraction,
                                 RandomStream& stream, int height = -1);

/// ceil() that forgives representation error such as 64 * 0.08 = 5.120000000000001.
int ceil_count(double x);

}  // namespace jointrecon
