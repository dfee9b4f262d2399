#pragma once

#include "facade/features.hpp"
#include "facade/matrix.hpp"
#include "facade/point_cloud.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace facade {

inline constexpr std::string_view toolkit_version = "1.0.0";
inline constexpr std::uint32_t fused_format_version = 1;

/// Coordinates plus selected features plus label, one row per valid point.
struct FusionDataset
{
  std::vector<std::string> columns; ///< x, y, z, features..., label
  Matrix values;                    ///< x, y, z, features (no label)
  std::vector<ClassId> labels;
  std::string source_id;
  double radius = 0.0;
  std::string set_name;
  std::size_t omitted = 0;
  std::string toolkit;
};

FusionDataset build_fused(const LabeledPointCloud& cloud,
                          const FeatureTable& table,
                          const FeatureSet& set,
                          const std::string& source_id);

enum class FusedFormat
{
  csv,
  packed_binary,
};

/// CSV layout:
///   # facade-feats v1; radius=<r>; set=<name>; omitted=<n>
///   # source=<id>; toolkit=<version>; values=raw (no normalization)
///   x,y,z,<features...>,label
/// Coordinates carry 6 decimals; features use the shortest exact decimal form.
///
/// Packed binary layout (little endian):
///   char[16] "FACADE-FEATS-BIN", u32 version, u32 column count (incl. label),
///   u64 row count, then rows of (column count - 1) float32 values followed by
///   an int32 label, then u32 byte length + UTF-8 text of the CSV header lines.
void write_fused(const FusionDataset& data, const std::filesystem::path& path, FusedFormat format);

void export_fused(const LabeledPointCloud& cloud,
                  const FeatureTable& table,
                  const FeatureSet& set,
                  const std::filesystem::path& path,
                  FusedFormat format,
                  const std::string& source_id = "cloud");

FusionDataset read_fused(const std::filesystem::path& path, FusedFormat format);

/// Writes `<prefix>_XYZ`, `<prefix>_XYZ+9F` and `<prefix>_XYZ+6F` with the
/// format's extension (.csv / .bin) and identical row order. Returns the paths.
std::array<std::filesystem::path, 3> export_experiment_suite(const LabeledPointCloud& cloud,
                                                             const FeatureTable& table,
                                                             const std::string& path_prefix,
                                                             FusedFormat format = FusedFormat::csv,
                                                             const std::string& source_id = "cloud");

} // namespace facade
