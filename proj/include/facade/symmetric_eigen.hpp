#pragma once

#include "facade/point_cloud.hpp"

#include <array>
#include <span>

namespace facade {

using Mat3 = std::array<std::array<double, 3>, 3>;

/// Sorted eigen-structure of a neighborhood's structure tensor.
struct NeighborhoodEigen
{
  Vec3 eigenvalues{};                ///< lambda1 >= lambda2 >= lambda3 >= 0, m^2
  std::array<Vec3, 3> eigenvectors{}; ///< eigenvectors[i] pairs with eigenvalues[i]
  std::size_t neighbor_count = 0;
};

/// Population covariance (divisor n) of `coords` about their mean.
Mat3 structure_tensor(std::span<const Vec3> coords);

/// Eigen-decomposition by cyclic Jacobi rotations.
///
/// Eigenvalues are sorted descending and clamped at zero. Each eigenvector is
/// flipped so its largest-magnitude coordinate is positive (earliest axis wins
/// ties), which makes the result independent of the solver's sign choices.
/// Throws facade::Error when `m` is not symmetric within 1e-12.
NeighborhoodEigen eigen_decompose(const Mat3& m);

/// Applies the sign convention above in place.
void canonicalize_sign(Vec3& v);

double frobenius_norm(const Mat3& m);

} // namespace facade
