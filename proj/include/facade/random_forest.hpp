#pragma once

#include "facade/features.hpp"
#include "facade/matrix.hpp"
#include "facade/point_cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace facade {

struct ForestHyperparams
{
  std::size_t n_trees = 100;
  std::optional<std::size_t> max_depth;          ///< nullopt = unlimited
  std::size_t min_samples_leaf = 1;
  std::optional<std::size_t> features_per_split; ///< nullopt = floor(sqrt(#features))
  double bootstrap_fraction = 1.0;
  std::uint64_t rng_seed = 42;
  unsigned threads = 0; ///< not part of the model; results do not depend on it

  void validate() const;
  std::size_t resolved_features_per_split(std::size_t n_features) const;
};

/// Binary decision tree. Samples with x[feature] <= threshold go left.
struct DecisionTree
{
  struct Node
  {
    std::int32_t feature = -1; ///< -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    std::int32_t leaf = -1; ///< offset / n_classes into leaf_probabilities
  };

  std::vector<Node> nodes;
  std::vector<double> leaf_probabilities;

  /// Class-probability vector of the leaf reached by `x`.
  std::span<const double> leaf_for(std::span<const double> x, std::size_t n_classes) const;
};

struct ForestModel
{
  ForestHyperparams params;
  std::vector<std::string> feature_names;
  std::vector<ClassId> class_ids;               ///< ascending
  std::vector<std::uint64_t> class_counts;      ///< training rows per class
  std::vector<double> importances;              ///< aligned with feature_names
  std::vector<DecisionTree> trees;

  std::size_t n_classes() const noexcept { return class_ids.size(); }
  ClassId majority_class() const;
};

/// Trees grow on bootstrap samples; each node picks the best Gini split among
/// a random subset of non-constant features. Tree t draws from its own
/// mt19937_64 seeded with rng_seed + t, so the forest is identical for any
/// thread count.
ForestModel train_forest(const Matrix& features,
                         std::span<const ClassId> labels,
                         std::vector<std::string> feature_names,
                         const ForestHyperparams& params);

/// Highest mean leaf probability; ties go to the lowest class id.
std::vector<ClassId> predict(const ForestModel& model, const Matrix& features);

/// As above, after checking `column_names` against the training columns.
std::vector<ClassId> predict(const ForestModel& model,
                             const Matrix& features,
                             const std::vector<std::string>& column_names);

/// Mean decrease in Gini impurity, sorted descending (stable on ties).
std::vector<std::pair<std::string, double>> feature_importance(const ForestModel& model);

struct TopK
{
  std::size_t k;
};
using SelectionRule = std::variant<double, TopK>; ///< double = strict score threshold

/// Geometric features passing `rule`, in importance order. x, y, z are never
/// returned; they always accompany the selected features.
FeatureSet select_top_features(const std::vector<std::pair<std::string, double>>& importances,
                               const SelectionRule& rule);

/// `feature,score` CSV in the given order.
void save_importance_csv(const std::vector<std::pair<std::string, double>>& importances,
                         const std::filesystem::path& path);

inline constexpr std::uint32_t model_format_version = 1;

void save_model(const ForestModel& model, const std::filesystem::path& path);
ForestModel load_model(const std::filesystem::path& path);

} // namespace facade
