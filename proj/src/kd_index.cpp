#include "facade/kd_index.hpp"

#include "facade/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace facade {

namespace {

inline double
squared_distance(const Vec3& a, const Vec3& b)
{
  const double dx = a[0] - b[0];
  const double dy = a[1] - b[1];
  const double dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

} // namespace

KdIndex::KdIndex(std::span<const Vec3> points, std::size_t leaf_size)
  : points_(points.begin(), points.end())
  , leaf_size_(std::max<std::size_t>(leaf_size, 1))
{
  if (points_.size() > std::numeric_limits<std::uint32_t>::max())
    throw Error("KD index supports at most 2^32-1 points");
  for (std::size_t i = 0; i < points_.size(); ++i)
    for (const double c : points_[i])
      if (!std::isfinite(c))
        throw Error("cannot index point " + std::to_string(i) + ": non-finite coordinate");
  if (points_.empty())
    return;
  order_.resize(points_.size());
  std::iota(order_.begin(), order_.end(), 0u);
  nodes_.reserve(2 * (points_.size() / leaf_size_ + 1));
  build(0, static_cast<std::uint32_t>(points_.size()), 1);
}

std::int32_t
KdIndex::build(std::uint32_t begin, std::uint32_t end, std::size_t depth)
{
  depth_ = std::max(depth_, depth);
  const auto id = static_cast<std::int32_t>(nodes_.size());
  nodes_.emplace_back();
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo = points_[order_[begin]];
  node.hi = node.lo;
  for (auto i = begin + 1; i < end; ++i) {
    const auto& p = points_[order_[i]];
    for (int k = 0; k < 3; ++k) {
      node.lo[k] = std::min(node.lo[k], p[k]);
      node.hi[k] = std::max(node.hi[k], p[k]);
    }
  }

  int axis = 0;
  double spread = node.hi[0] - node.lo[0];
  for (int k = 1; k < 3; ++k) {
    if (node.hi[k] - node.lo[k] > spread) {
      spread = node.hi[k] - node.lo[k];
      axis = k;
    }
  }

  if (end - begin <= leaf_size_ || spread <= 0.0) {
    nodes_[id] = node;
    return id;
  }

  const auto mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + begin,
                   order_.begin() + mid,
                   order_.begin() + end,
                   [&](std::uint32_t a, std::uint32_t b) {
                     const double va = points_[a][axis];
                     const double vb = points_[b][axis];
                     return va < vb || (va == vb && a < b);
                   });
  node.axis = static_cast<std::uint8_t>(axis);
  node.split = points_[order_[mid]][axis];
  node.left = build(begin, mid, depth + 1);
  node.right = build(mid, end, depth + 1);
  nodes_[id] = node;
  return id;
}

std::vector<std::size_t>
KdIndex::radius_query(const Vec3& center, double radius) const
{
  std::vector<std::size_t> out;
  radius_query(center, radius, out);
  return out;
}

void
KdIndex::radius_query(const Vec3& center, double radius, std::vector<std::size_t>& out) const
{
  out.clear();
  if (!std::isfinite(radius) || !(radius > 0.0))
    throw Error("radius must be finite and > 0");
  for (const double c : center)
    if (!std::isfinite(c))
      throw Error("query center must be finite");
  if (nodes_.empty())
    return;

  const double r2 = radius * radius;
  std::int32_t stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];

    double near2 = 0.0;
    double far2 = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double below = node.lo[k] - center[k];
      const double above = center[k] - node.hi[k];
      const double gap = std::max({ below, above, 0.0 });
      near2 += gap * gap;
      const double reach = std::max(center[k] - node.lo[k], node.hi[k] - center[k]);
      far2 += reach * reach;
    }
    if (near2 > r2)
      continue;
    if (far2 <= r2) {
      for (auto i = node.begin; i < node.end; ++i)
        out.push_back(order_[i]);
      continue;
    }
    if (node.is_leaf()) {
      for (auto i = node.begin; i < node.end; ++i)
        if (squared_distance(points_[order_[i]], center) <= r2)
          out.push_back(order_[i]);
      continue;
    }
    stack[top++] = node.right;
    stack[top++] = node.left;
  }
  std::sort(out.begin(), out.end());
}

std::vector<std::vector<std::size_t>>
KdIndex::leaves() const
{
  std::vector<std::vector<std::size_t>> out;
  for (const auto& node : nodes_) {
    if (!node.is_leaf())
      continue;
    out.emplace_back(order_.begin() + node.begin, order_.begin() + node.end);
  }
  return out;
}

} // namespace facade
