#include "jointrecon/grid.hpp"

namespace jointrecon {

void validate(const ImagePair& pair) {
  if (pair.pet.rows() != pair.mri.rows() || pair.pet.cols() != pair.mri.cols()) {
    throw DimensionError("ImagePair: pet and mri shapes differ");
  }
  if (!all_finite(pair.pet) || !all_finite(pair.mri)) {
    throw DimensionError("ImagePair: non-finite entries");
  }
  if ((pair.pet.array() < 0.0).any()) {
    throw ParameterError("ImagePair: negative PET activity");
  }
}

}  // namespace jointrecon
