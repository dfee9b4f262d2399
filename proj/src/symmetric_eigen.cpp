#include "facade/symmetric_eigen.hpp"

#include "facade/error.hpp"

#include <algorithm>
#include <cmath>

namespace facade {

Mat3
structure_tensor(std::span<const Vec3> coords)
{
  if (coords.empty())
    throw Error("structure tensor needs at least one point");
  const double n = static_cast<double>(coords.size());
  Vec3 mean{};
  for (const auto& p : coords)
    for (int k = 0; k < 3; ++k)
      mean[k] += p[k];
  for (auto& m : mean)
    m /= n;

  double xx = 0, xy = 0, xz = 0, yy = 0, yz = 0, zz = 0;
  for (const auto& p : coords) {
    const double dx = p[0] - mean[0];
    const double dy = p[1] - mean[1];
    const double dz = p[2] - mean[2];
    xx += dx * dx;
    xy += dx * dy;
    xz += dx * dz;
    yy += dy * dy;
    yz += dy * dz;
    zz += dz * dz;
  }
  xx /= n, xy /= n, xz /= n, yy /= n, yz /= n, zz /= n;
  return { { { xx, xy, xz }, { xy, yy, yz }, { xz, yz, zz } } };
}

double
frobenius_norm(const Mat3& m)
{
  double s = 0.0;
  for (const auto& row : m)
    for (const double v : row)
      s += v * v;
  return std::sqrt(s);
}

void
canonicalize_sign(Vec3& v)
{
  int k = 0;
  for (int i = 1; i < 3; ++i)
    if (std::abs(v[i]) > std::abs(v[k]))
      k = i;
  if (v[k] < 0.0)
    for (auto& c : v)
      c = -c;
}

NeighborhoodEigen
eigen_decompose(const Mat3& m)
{
  double scale = 1.0;
  for (const auto& row : m)
    for (const double v : row) {
      if (!std::isfinite(v))
        throw Error("eigen_decompose: non-finite matrix entry");
      scale = std::max(scale, std::abs(v));
    }
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      if (std::abs(m[i][j] - m[j][i]) > 1e-12 * scale)
        throw Error("eigen_decompose: matrix is not symmetric");

  // Work on the symmetrized upper triangle.
  double a[3][3];
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      a[i][j] = 0.5 * (m[i][j] + m[j][i]);
  double v[3][3] = { { 1, 0, 0 }, { 0, 1, 0 }, { 0, 0, 1 } };

  for (int sweep = 0; sweep < 64; ++sweep) {
    const double off = std::abs(a[0][1]) + std::abs(a[0][2]) + std::abs(a[1][2]);
    const double diag = std::abs(a[0][0]) + std::abs(a[1][1]) + std::abs(a[2][2]);
    if (off == 0.0 || off <= 1e-18 * diag)
      break;
    for (int p = 0; p < 2; ++p) {
      for (int q = p + 1; q < 3; ++q) {
        const double apq = a[p][q];
        if (apq == 0.0)
          continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 3; ++k) {
          const double akp = a[k][p];
          const double akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 3; ++k) {
          const double apk = a[p][k];
          const double aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 3; ++k) {
          const double vkp = v[k][p];
          const double vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }

  int order[3] = { 0, 1, 2 };
  std::stable_sort(order, order + 3, [&](int x, int y) { return a[x][x] > a[y][y]; });

  NeighborhoodEigen out;
  for (int i = 0; i < 3; ++i) {
    const int c = order[i];
    out.eigenvalues[i] = std::max(a[c][c], 0.0);
    Vec3 e{ v[0][c], v[1][c], v[2][c] };
    const double norm = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
    for (auto& x : e)
      x /= norm;
    canonicalize_sign(e);
    out.eigenvectors[i] = e;
  }
  return out;
}

} // namespace facade
