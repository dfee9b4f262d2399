#pragma once

#include "facade/point_cloud.hpp"

#include <cstdint>
#include <string_view>

namespace facade::synthetic {

enum class Scene
{
  plane,      ///< jittered grid on z = 0, class 1
  line,       ///< points along the x axis, class 2
  ball,       ///< jittered cubic lattice inside a sphere, class 3
  plane_line, ///< plane (class 1) with a line (class 2) 2 m above it
  facade,     ///< mock building front: wall, windows, door, moldings, terrain, roof
};

Scene parse_scene(std::string_view name);

struct SceneOptions
{
  std::size_t n = 2000;
  double spacing = 0.0; ///< 0 picks a per-scene default
  double jitter = 0.1;  ///< uniform jitter amplitude as a fraction of spacing
  std::uint64_t seed = 1;
};

/// Deterministic for fixed options. Facade scenes hit `n` approximately; all
/// others produce exactly `n` points.
LabeledPointCloud generate(Scene scene, const SceneOptions& options);

/// Default spacing for each scene, in meters.
double default_spacing(Scene scene);

} // namespace facade::synthetic
