#pragma once

#include "facade/point_cloud.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace facade {

/// Static KD-tree over a snapshot of point coordinates.
///
/// Nodes split at the median of the axis with the widest coordinate spread
/// until at most `leaf_size` points remain. The index owns a copy of the
/// coordinates, so it stays valid after the source cloud goes away. A built
/// index is immutable and may be queried from any number of threads.
class KdIndex
{
public:
  static constexpr std::size_t default_leaf_size = 16;

  KdIndex() = default;
  explicit KdIndex(std::span<const Vec3> points, std::size_t leaf_size = default_leaf_size);

  std::size_t point_count() const noexcept { return points_.size(); }
  std::size_t leaf_size() const noexcept { return leaf_size_; }
  std::size_t depth() const noexcept { return depth_; }
  const std::vector<Vec3>& points() const noexcept { return points_; }

  /// Indices i with |p_i - center| <= radius, ascending.
  std::vector<std::size_t> radius_query(const Vec3& center, double radius) const;

  /// Same as radius_query but reuses `out` to avoid reallocation in hot loops.
  void radius_query(const Vec3& center, double radius, std::vector<std::size_t>& out) const;

  /// Each point index appears in exactly one leaf. Used by tests.
  std::vector<std::vector<std::size_t>> leaves() const;

private:
  struct Node
  {
    // Leaf: [begin, end) into order_. Inner: split axis/value, children.
    std::uint32_t begin = 0;
    std::uint32_t end = 0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::uint8_t axis = 0;
    double split = 0.0;
    Vec3 lo{};
    Vec3 hi{};

    bool is_leaf() const noexcept { return left < 0; }
  };

  std::int32_t build(std::uint32_t begin, std::uint32_t end, std::size_t depth);

  std::vector<Vec3> points_;
  std::vector<std::uint32_t> order_;
  std::vector<Node> nodes_;
  std::size_t leaf_size_ = default_leaf_size;
  std::size_t depth_ = 0;
};

inline KdIndex
build_index(const LabeledPointCloud& cloud, std::size_t leaf_size = KdIndex::default_leaf_size)
{
  return KdIndex(cloud.points, leaf_size);
}

} // namespace facade
