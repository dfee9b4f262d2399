#pragma once

#include "facade/kd_index.hpp"
#include "facade/matrix.hpp"
#include "facade/point_cloud.hpp"
#include "facade/symmetric_eigen.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace facade {

/// `standard` is (lambda2 - lambda3) / lambda1. `printed_literal` reproduces
/// (lambda2 - lambda1) / lambda1, which is never positive for sorted eigenvalues
/// and exists only so published numbers can be audited.
enum class PlanarityFormula
{
  standard,
  printed_literal,
};

struct CovarianceFeatures
{
  double planarity = 0.0;
  double omnivariance = 0.0;
  double surface_variation = 0.0;
  double pca1 = 0.0;
  double pca2 = 0.0;
  double pca3 = 0.0;
  Vec3 e2{};
  bool valid = false;
};

CovarianceFeatures covariance_features(const NeighborhoodEigen& eigen,
                                       PlanarityFormula formula = PlanarityFormula::standard);

/// Stored feature columns, in table order.
inline constexpr std::array<std::string_view, 9> feature_columns = {
  "planarity", "omnivariance", "surface_variation", "pca1", "pca2",
  "pca3",      "e2_x",         "e2_y",              "e2_z",
};

/// Per-point features aligned 1:1 with the source cloud.
struct FeatureTable
{
  double radius = 0.0;
  std::size_t min_neighbors = 0;
  std::vector<std::array<double, feature_columns.size()>> rows;
  std::vector<std::uint8_t> valid;
  std::vector<std::uint32_t> neighbor_counts;

  std::size_t size() const noexcept { return rows.size(); }
  std::size_t valid_count() const noexcept;

  /// Position of `name` in feature_columns; throws facade::Error if unknown.
  static std::size_t column_index(std::string_view name);
};

struct ExtractOptions
{
  double radius = 0.8;
  std::size_t min_neighbors = 10;
  PlanarityFormula planarity = PlanarityFormula::standard;
  unsigned threads = 0; ///< 0 = hardware concurrency
};

/// Row i depends only on point i's neighborhood; output is identical for any
/// thread count.
FeatureTable extract_features(const LabeledPointCloud& cloud, const ExtractOptions& options);
FeatureTable extract_features(const KdIndex& index, const ExtractOptions& options);

/// Named ordered selection of feature columns.
struct FeatureSet
{
  std::string name;
  std::vector<std::string> columns;

  static FeatureSet xyz_only();
  static FeatureSet nine_f();
  static FeatureSet six_f();

  /// "XYZ", "9F"/"NINE_F", "6F"/"SIX_F", or a comma-separated column list.
  static FeatureSet parse(std::string_view selection);
};

struct SelectedMatrix
{
  std::vector<std::string> column_names;
  Matrix rows;
  std::vector<std::uint8_t> valid; ///< 0 rows were zero-filled
};

/// Columns in `set` order, prefixed by x, y, z when `include_xyz`.
SelectedMatrix select_columns(const LabeledPointCloud& cloud,
                              const FeatureTable& table,
                              const FeatureSet& set,
                              bool include_xyz);

/// Feature-table CSV: metadata comment lines, then
/// `x,y,z,<feature_columns>,neighbors,valid[,label]`.
void save_feature_table(const LabeledPointCloud& cloud,
                        const FeatureTable& table,
                        const std::filesystem::path& path);

struct LoadedFeatureTable
{
  LabeledPointCloud cloud;
  FeatureTable table;
};

LoadedFeatureTable load_feature_table(const std::filesystem::path& path);

} // namespace facade
