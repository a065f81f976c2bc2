#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <string>

#include "jointrecon/errors.hpp"

namespace jointrecon {

using Complex = std::complex<double>;

/// Dense 2-D raster, row-major so that the in-memory order matches the
/// on-disk payload order.
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using RealGrid = Grid<double>;
using ComplexGrid = Grid<Complex>;

/// Joint unknown: PET activity and complex MRI image on a shared raster.
struct ImagePair {
  RealGrid pet;
  ComplexGrid mri;

  Eigen::Index height() const { return pet.rows(); }
  Eigen::Index width() const { return pet.cols(); }

  static ImagePair zeros(Eigen::Index height, Eigen::Index width) {
    return {RealGrid::Zero(height, width), ComplexGrid::Zero(height, width)};
  }
};

template <typename A, typename B>
void require_same_shape(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b,
                        const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch (" + std::to_string(a.rows()) +
                         "x" + std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) +
                         "x" + std::to_string(b.cols()) + ")");
  }
}

/// Sum of conj(a_k) * b_k. Conjugate-linear in the first argument; reduces to
/// the ordinary dot product for real grids.
template <typename A, typename B>
typename A::Scalar inner_product(const Eigen::MatrixBase<A>& a, const Eigen::MatrixBase<B>& b) {
  require_same_shape(a, b, "inner_product");
  return a.derived().conjugate().cwiseProduct(b.derived()).sum();
}

template <typename A>
double norm(const Eigen::MatrixBase<A>& a) {
  return a.derived().norm();
}

template <typename A>
bool all_finite(const Eigen::MatrixBase<A>& a) {
  return a.derived().allFinite();
}

/// Validates the ImagePair invariants: matching shapes, finite entries, pet >= 0.
void validate(const ImagePair& pair);

}  // namespace jointrecon
