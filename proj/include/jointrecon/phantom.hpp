#pragma once

#include "jointrecon/grid.hpp"
#include "jointrecon/random.hpp"

namespace jointrecon {

/// Random paired-phantom recipe. Counts are inclusive ranges.
struct PhantomSpec {
  int size = 64;
  int min_ellipses = 4;
  int max_ellipses = 8;
  int min_lesions = 1;
  int max_lesions = 3;

  void validate() const;
};

/// Shared-anatomy pair: both modalities paint the same ellipses (so their
/// supports coincide) with independently drawn intensities. PET additionally
/// gets smooth uptake blobs; lesions go into both with independent amplitudes.
/// The MRI image carries a smooth low-order polynomial phase.
ImagePair make_phantom_pair(const PhantomSpec& spec, RandomStream& stream);

}  // namespace jointrecon
