#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace facade {

using Vec3 = std::array<double, 3>;
using ClassId = std::int32_t;

/// Per-point attribute read from a PLY file that the toolkit does not interpret.
struct ExtraAttribute
{
  std::string name;
  std::vector<double> values;
};

/// Ordered 3D points (meters) with optional per-point class labels.
struct LabeledPointCloud
{
  std::vector<Vec3> points;
  std::optional<std::vector<ClassId>> labels;
  std::map<ClassId, std::string> class_names;
  std::vector<ExtraAttribute> extras;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
  bool has_labels() const noexcept { return labels.has_value(); }

  /// Throws facade::Error describing the first violated invariant.
  void validate() const;

  /// Display name for `id`, falling back to its decimal form.
  std::string class_name(ClassId id) const;
};

/// Maps source class ids onto a coarser target schema.
struct ClassMergeSchema
{
  std::map<ClassId, std::string> source_names; // optional; enables totality check
  std::map<ClassId, ClassId> mapping;
  std::map<ClassId, std::string> target_names;

  void validate() const;

  static ClassMergeSchema identity(const std::map<ClassId, std::string>& names);
};

enum class CloudFormat
{
  ascii_ply,
  xyz_label_text,
};

/// Picks a format from the file extension: `.ply` is PLY, anything else text.
CloudFormat format_from_path(const std::filesystem::path& path);

LabeledPointCloud load_point_cloud(const std::filesystem::path& path, CloudFormat format);
inline LabeledPointCloud load_point_cloud(const std::filesystem::path& path)
{
  return load_point_cloud(path, format_from_path(path));
}

/// Coordinates are written with 6 decimals. Extra attributes are dropped.
void save_point_cloud(const LabeledPointCloud& cloud,
                      const std::filesystem::path& path,
                      CloudFormat format);
inline void save_point_cloud(const LabeledPointCloud& cloud, const std::filesystem::path& path)
{
  save_point_cloud(cloud, path, format_from_path(path));
}

LabeledPointCloud apply_class_merge(const LabeledPointCloud& cloud, const ClassMergeSchema& schema);

/// JSON document: {"source_names": {"1": "wall", ...}, "mapping": {"1": 1, ...},
/// "target_names": {"1": "wall", ...}}. `source_names` may be omitted.
ClassMergeSchema load_merge_schema(const std::filesystem::path& path);
void save_merge_schema(const ClassMergeSchema& schema, const std::filesystem::path& path);

/// Concatenates clouds; class names are unioned, labels kept only if all inputs carry them.
LabeledPointCloud concatenate(const std::vector<LabeledPointCloud>& clouds);

/// Cloud restricted to `indices` (in the given order). Extras are carried along.
LabeledPointCloud subset(const LabeledPointCloud& cloud, const std::vector<std::size_t>& indices);

} // namespace facade
