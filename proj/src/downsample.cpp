#include "facade/downsample.hpp"

#include "facade/error.hpp"

#include <cmath>
#include <cstdint>
#include <unordered_map>

namespace facade {

namespace {

struct CellKey
{
  std::int64_t x, y, z;
  bool operator==(const CellKey&) const = default;
};

struct CellHash
{
  std::size_t operator()(const CellKey& k) const noexcept
  {
    std::uint64_t h = static_cast<std::uint64_t>(k.x) * 0x9E3779B97F4A7C15ull;
    h ^= static_cast<std::uint64_t>(k.y) * 0xC2B2AE3D27D4EB4Full + (h << 6) + (h >> 2);
    h ^= static_cast<std::uint64_t>(k.z) * 0x165667B19E3779F9ull + (h << 6) + (h >> 2);
    return static_cast<std::size_t>(h);
  }
};

} // namespace

void
DownsampleSpec::validate() const
{
  if (!std::isfinite(min_distance) || !(min_distance > 0.0))
    throw Error("downsample min_distance must be finite and > 0");
}

std::vector<std::size_t>
distance_downsample_indices(const LabeledPointCloud& cloud, const DownsampleSpec& spec)
{
  spec.validate();
  const double d = spec.min_distance;
  const double d2 = d * d;
  const auto cell_of = [d](const Vec3& p) {
    return CellKey{ static_cast<std::int64_t>(std::floor(p[0] / d)),
                    static_cast<std::int64_t>(std::floor(p[1] / d)),
                    static_cast<std::int64_t>(std::floor(p[2] / d)) };
  };

  // Cells of side d: any kept point closer than d sits in one of the 27 neighbors.
  std::unordered_map<CellKey, std::vector<std::size_t>, CellHash> grid;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Vec3& p = cloud.points[i];
    for (const double c : p)
      if (!std::isfinite(c))
        throw Error("cannot downsample point " + std::to_string(i) + ": non-finite coordinate");
    const CellKey cell = cell_of(p);
    bool blocked = false;
    for (std::int64_t dx = -1; dx <= 1 && !blocked; ++dx) {
      for (std::int64_t dy = -1; dy <= 1 && !blocked; ++dy) {
        for (std::int64_t dz = -1; dz <= 1 && !blocked; ++dz) {
          const auto it = grid.find({ cell.x + dx, cell.y + dy, cell.z + dz });
          if (it == grid.end())
            continue;
          for (const auto j : it->second) {
            const Vec3& q = cloud.points[j];
            const double ex = p[0] - q[0], ey = p[1] - q[1], ez = p[2] - q[2];
            if (ex * ex + ey * ey + ez * ez < d2) {
              blocked = true;
              break;
            }
          }
        }
      }
    }
    if (!blocked) {
      grid[cell].push_back(i);
      kept.push_back(i);
    }
  }
  return kept;
}

LabeledPointCloud
distance_downsample(const LabeledPointCloud& cloud, const DownsampleSpec& spec)
{
  return subset(cloud, distance_downsample_indices(cloud, spec));
}

} // namespace facade
