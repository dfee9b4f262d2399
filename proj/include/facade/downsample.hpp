#pragma once

#include "facade/point_cloud.hpp"

#include <vector>

namespace facade {

struct DownsampleSpec
{
  double min_distance = 0.1; // meters

  void validate() const;
};

/// Indices of the points kept by greedy first-come selection: a point is kept
/// iff no previously kept point lies strictly closer than `min_distance`.
/// Ascending, so output order follows input order.
std::vector<std::size_t> distance_downsample_indices(const LabeledPointCloud& cloud,
                                                     const DownsampleSpec& spec);

/// Subset of `cloud` with pairwise spacing >= min_distance. Kept points retain
/// their original coordinates and labels.
LabeledPointCloud distance_downsample(const LabeledPointCloud& cloud, const DownsampleSpec& spec);

} // namespace facade
