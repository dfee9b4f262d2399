#include "facade/synthetic.hpp"

#include "facade/error.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <tuple>

namespace facade::synthetic {

namespace {

class Rng
{
public:
  explicit Rng(std::uint64_t seed)
    : engine_(seed)
  {}

  /// Uniform in [-1, 1).
  double symmetric() { return 2.0 * unit() - 1.0; }
  double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
  std::mt19937_64 engine_;
};

struct Rect
{
  double x0, x1, z0, z1;
  bool contains(double x, double z) const { return x >= x0 && x <= x1 && z >= z0 && z <= z1; }
};

LabeledPointCloud
plane(const SceneOptions& o, double h, Rng& rng)
{
  LabeledPointCloud cloud;
  const auto side = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(o.n))));
  const double amp = o.jitter * h;
  for (std::size_t k = 0; k < o.n; ++k) {
    const double gx = static_cast<double>(k % side) * h;
    const double gy = static_cast<double>(k / side) * h;
    const double jx = amp * rng.symmetric();
    const double jy = amp * rng.symmetric();
    cloud.points.push_back({ gx + jx, gy + jy, 0.0 });
  }
  cloud.labels = std::vector<ClassId>(o.n, 1);
  cloud.class_names = { { 1, "plane" } };
  return cloud;
}

LabeledPointCloud
line(const SceneOptions& o, double h, Rng& rng)
{
  LabeledPointCloud cloud;
  const double amp = o.jitter * h;
  for (std::size_t k = 0; k < o.n; ++k) {
    const double jx = amp * rng.symmetric();
    const double jy = amp * rng.symmetric();
    const double jz = amp * rng.symmetric();
    cloud.points.push_back({ static_cast<double>(k) * h + jx, jy, jz });
  }
  cloud.labels = std::vector<ClassId>(o.n, 2);
  cloud.class_names = { { 2, "line" } };
  return cloud;
}

LabeledPointCloud
ball(const SceneOptions& o, double h, Rng& rng)
{
  // Take the n lattice sites nearest the origin; ties resolved by site order.
  const auto reach = static_cast<long>(std::ceil(std::cbrt(static_cast<double>(o.n) * 3.0 / (4.0 * M_PI)))) + 2;
  std::vector<std::tuple<long, long, long, long>> sites;
  for (long i = -reach; i <= reach; ++i)
    for (long j = -reach; j <= reach; ++j)
      for (long k = -reach; k <= reach; ++k)
        sites.emplace_back(i * i + j * j + k * k, i, j, k);
  if (sites.size() < o.n)
    throw Error("ball lattice too small");
  std::partial_sort(sites.begin(), sites.begin() + static_cast<long>(o.n), sites.end());
  LabeledPointCloud cloud;
  const double amp = o.jitter * h;
  for (std::size_t s = 0; s < o.n; ++s) {
    const auto [r2, i, j, k] = sites[s];
    cloud.points.push_back({ static_cast<double>(i) * h + amp * rng.symmetric(),
                             static_cast<double>(j) * h + amp * rng.symmetric(),
                             static_cast<double>(k) * h + amp * rng.symmetric() });
  }
  cloud.labels = std::vector<ClassId>(o.n, 3);
  cloud.class_names = { { 3, "ball" } };
  return cloud;
}

LabeledPointCloud
plane_line(const SceneOptions& o, Rng& rng)
{
  SceneOptions half = o;
  half.n = o.n / 2;
  auto cloud = plane(half, default_spacing(Scene::plane), rng);
  half.n = o.n - half.n;
  auto l = line(half, default_spacing(Scene::line), rng);
  for (auto& p : l.points)
    p[2] += 2.0;
  return concatenate({ cloud, l });
}

// Emits a jittered grid on the parallelogram origin + s*u + t*v, s in [0, su], t in [0, sv].
void
emit_patch(LabeledPointCloud& cloud,
           std::vector<ClassId>& labels,
           const Vec3& origin,
           const Vec3& u,
           double su,
           const Vec3& v,
           double sv,
           double h,
           double amp,
           ClassId label,
           Rng& rng,
           const std::function<bool(const Vec3&)>& keep = {})
{
  const auto nu = static_cast<long>(std::floor(su / h)) + 1;
  const auto nv = static_cast<long>(std::floor(sv / h)) + 1;
  for (long a = 0; a < nu; ++a) {
    for (long b = 0; b < nv; ++b) {
      const double s = std::clamp(static_cast<double>(a) * h + amp * rng.symmetric(), 0.0, su);
      const double t = std::clamp(static_cast<double>(b) * h + amp * rng.symmetric(), 0.0, sv);
      const Vec3 p{ origin[0] + s * u[0] + t * v[0],
                    origin[1] + s * u[1] + t * v[1],
                    origin[2] + s * u[2] + t * v[2] };
      if (keep && !keep(p))
        continue;
      cloud.points.push_back(p);
      labels.push_back(label);
    }
  }
}

LabeledPointCloud
facade_scene(const SceneOptions& o, Rng& rng)
{
  constexpr ClassId wall = 1, window = 2, door = 3, molding = 4, terrain = 7, roof = 8;
  constexpr double width = 10.0, height = 6.0;
  const double roof_depth = std::hypot(3.0, 2.0);
  const double area = width * height + 12.0 * 4.0 + width * roof_depth + width * 0.6;
  const double h = o.spacing > 0.0 ? o.spacing : std::sqrt(area / static_cast<double>(std::max<std::size_t>(o.n, 1)));
  const double amp = o.jitter * h;

  std::vector<Rect> windows;
  for (const double cx : { 2.0, 8.0 })
    windows.push_back({ cx - 0.6, cx + 0.6, 1.0, 2.5 });
  for (const double cx : { 2.0, 5.0, 8.0 })
    windows.push_back({ cx - 0.6, cx + 0.6, 3.8, 5.3 });
  const Rect door_rect{ 4.5, 5.5, 0.0, 2.2 };
  const Rect molding_rect{ 0.0, width, 3.1, 3.3 };

  LabeledPointCloud cloud;
  std::vector<ClassId> labels;
  const Vec3 ex{ 1, 0, 0 }, ey{ 0, 1, 0 }, ez{ 0, 0, 1 };

  emit_patch(cloud, labels, { 0, 0, 0 }, ex, width, ez, height, h, amp, wall, rng, [&](const Vec3& p) {
    if (door_rect.contains(p[0], p[2]) || molding_rect.contains(p[0], p[2]))
      return false;
    return std::none_of(windows.begin(), windows.end(), [&](const Rect& w) { return w.contains(p[0], p[2]); });
  });
  for (const auto& w : windows)
    emit_patch(cloud, labels, { w.x0, 0.2, w.z0 }, ex, w.x1 - w.x0, ez, w.z1 - w.z0, h, amp, window, rng);
  emit_patch(cloud, labels, { door_rect.x0, 0.3, 0.0 }, ex, door_rect.x1 - door_rect.x0, ez,
             door_rect.z1 - door_rect.z0, h, amp, door, rng);

  // Molding: protruding bar, front face plus top and bottom.
  emit_patch(cloud, labels, { 0, -0.2, 3.1 }, ex, width, ez, 0.2, h, amp, molding, rng);
  emit_patch(cloud, labels, { 0, -0.2, 3.3 }, ex, width, ey, 0.2, h, amp, molding, rng);
  emit_patch(cloud, labels, { 0, -0.2, 3.1 }, ex, width, ey, 0.2, h, amp, molding, rng);

  emit_patch(cloud, labels, { -1.0, -4.0, 0.0 }, ex, 12.0, ey, 4.0 - h, h, amp, terrain, rng);

  const Vec3 slope{ 0.0, 3.0 / roof_depth, 2.0 / roof_depth };
  emit_patch(cloud, labels, { 0.0, 0.0, height }, ex, width, slope, roof_depth, h, amp, roof, rng);

  cloud.labels = std::move(labels);
  cloud.class_names = { { wall, "wall" },       { window, "window" },   { door, "door" },
                        { molding, "molding" }, { terrain, "terrain" }, { roof, "roof" } };
  return cloud;
}

} // namespace

Scene
parse_scene(std::string_view name)
{
  if (name == "plane")
    return Scene::plane;
  if (name == "line")
    return Scene::line;
  if (name == "ball")
    return Scene::ball;
  if (name == "plane_line" || name == "plane+line")
    return Scene::plane_line;
  if (name == "facade")
    return Scene::facade;
  throw Error("unknown scene '" + std::string(name) + "' (plane, line, ball, plane_line, facade)");
}

double
default_spacing(Scene scene)
{
  switch (scene) {
    case Scene::plane:
      return 0.05;
    case Scene::line:
      return 0.01;
    case Scene::ball:
      return 0.25;
    case Scene::plane_line:
    case Scene::facade:
      return 0.0;
  }
  return 0.1;
}

LabeledPointCloud
generate(Scene scene, const SceneOptions& options)
{
  if (options.jitter < 0.0 || options.jitter >= 0.5)
    throw Error("jitter must be in [0, 0.5)");
  if (options.spacing < 0.0 || !std::isfinite(options.spacing))
    throw Error("spacing must be finite and >= 0");
  Rng rng(options.seed);
  const double h = options.spacing > 0.0 ? options.spacing : default_spacing(scene);
  switch (scene) {
    case Scene::plane:
      return plane(options, h, rng);
    case Scene::line:
      return line(options, h, rng);
    case Scene::ball:
      return ball(options, h, rng);
    case Scene::plane_line:
      return plane_line(options, rng);
    case Scene::facade:
      return facade_scene(options, rng);
  }
  throw Error("unhandled scene");
}

} // namespace facade::synthetic
