#pragma once

// Reference implementations that share no code with the library. They are
// slow on purpose and serve only as ground truth for the tests.

#include "facade/point_cloud.hpp"
#include "facade/symmetric_eigen.hpp"

#include <Eigen/Dense>
#include <quadmath.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

using facade::Vec3;

inline double
dist2(const Vec3& a, const Vec3& b)
{
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// Linear scan, inclusive boundary.
inline std::vector<std::size_t>
neighbors(const std::vector<Vec3>& pts, const Vec3& c, double r)
{
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i)
    if (dist2(pts[i], c) <= r * r)
      out.push_back(i);
  return out;
}

/// O(n^2) greedy first-come selection.
inline std::vector<std::size_t>
greedy_downsample(const std::vector<Vec3>& pts, double d)
{
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool ok = true;
    for (const auto k : kept)
      if (dist2(pts[i], pts[k]) < d * d) {
        ok = false;
        break;
      }
    if (ok)
      kept.push_back(i);
  }
  return kept;
}

/// Two-pass textbook covariance, divisor n.
inline Eigen::Matrix3d
covariance(const std::vector<Vec3>& pts, const std::vector<std::size_t>& idx)
{
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto i : idx)
    mean += Eigen::Vector3d(pts[i][0], pts[i][1], pts[i][2]);
  mean /= static_cast<double>(idx.size());
  Eigen::Matrix3d c = Eigen::Matrix3d::Zero();
  for (const auto i : idx) {
    const Eigen::Vector3d d = Eigen::Vector3d(pts[i][0], pts[i][1], pts[i][2]) - mean;
    c += d * d.transpose();
  }
  return c / static_cast<double>(idx.size());
}

struct Eig
{
  std::array<double, 3> values; // descending, clamped at 0
  std::array<Eigen::Vector3d, 3> vectors;
};

inline Eigen::Vector3d
canonical(Eigen::Vector3d v)
{
  int best = 0;
  for (int k = 1; k < 3; ++k)
    if (std::abs(v[k]) > std::abs(v[best]))
      best = k;
  return v[best] < 0 ? Eigen::Vector3d(-v) : v;
}

inline Eig
eigen(const Eigen::Matrix3d& m)
{
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(m);
  Eig e;
  for (int k = 0; k < 3; ++k) {
    e.values[k] = std::max(0.0, solver.eigenvalues()[2 - k]);
    e.vectors[k] = canonical(solver.eigenvectors().col(2 - k));
  }
  return e;
}

/// Roots of det(M - t I) = 0 via the trigonometric form of the cubic,
/// polished with Newton steps on the characteristic polynomial. Descending.
/// Evaluated in quad precision: clustered roots of a cubic are only resolved to
/// about the square root of the working precision.
inline std::array<double, 3>
char_poly_roots(const facade::Mat3& m)
{
  using Q = __float128;
  Q a[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a[i][j] = m[i][j];
  const Q c2 = -(a[0][0] + a[1][1] + a[2][2]);
  const Q c1 = a[0][0] * a[1][1] + a[0][0] * a[2][2] + a[1][1] * a[2][2] - a[0][1] * a[1][0] -
               a[0][2] * a[2][0] - a[1][2] * a[2][1];
  const Q c0 = -(a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                 a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                 a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]));
  // t = s - c2/3 gives s^3 + p s + q = 0
  const Q shift = -c2 / 3;
  const Q p = c1 - c2 * c2 / 3;
  const Q q = 2 * c2 * c2 * c2 / 27 - c2 * c1 / 3 + c0;
  Q r[3];
  if (p >= 0) {
    r[0] = r[1] = r[2] = shift;
  } else {
    const Q mag = 2 * sqrtq(-p / 3);
    Q arg = 3 * q / (p * mag);
    arg = arg > 1 ? Q(1) : (arg < -1 ? Q(-1) : arg);
    const Q theta = acosq(arg) / 3;
    for (int k = 0; k < 3; ++k)
      r[k] = shift + mag * cosq(theta - 2 * M_PIq * k / 3);
  }
  const auto f = [&](Q t) { return ((t + c2) * t + c1) * t + c0; };
  const auto df = [&](Q t) { return (3 * t + 2 * c2) * t + c1; };
  std::array<double, 3> out{};
  for (int k = 0; k < 3; ++k) {
    Q t = r[k];
    for (int it = 0; it < 8; ++it) {
      const Q d = df(t);
      if (d == 0)
        break;
      const Q next = t - f(t) / d;
      if (fabsq(f(next)) >= fabsq(f(t)))
        break;
      t = next;
    }
    out[k] = static_cast<double>(t);
  }
  std::sort(out.begin(), out.end(), std::greater<>());
  return out;
}

/// Feature values in table column order:
/// planarity, omnivariance, surface_variation, pca1..3, e2 x/y/z.
inline std::array<double, 9>
features(const Eig& e)
{
  const double l1 = e.values[0], l2 = e.values[1], l3 = e.values[2];
  return { (l2 - l3) / l1, std::cbrt(l1 * l2 * l3), l3 / (l1 + l2 + l3), l1, l2, l3,
           e.vectors[1][0], e.vectors[1][1], e.vectors[1][2] };
}

inline std::vector<Vec3>
uniform_cube(std::size_t n, double side, std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, side);
  std::vector<Vec3> pts(n);
  for (auto& p : pts)
    p = { u(rng), u(rng), u(rng) };
  return pts;
}

inline facade::LabeledPointCloud
cloud_of(std::vector<Vec3> pts)
{
  facade::LabeledPointCloud c;
  c.points = std::move(pts);
  return c;
}

} // namespace oracle
