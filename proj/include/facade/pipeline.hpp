#pragma once

#include "facade/features.hpp"
#include "facade/fusion_export.hpp"
#include "facade/random_forest.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace facade {

/// Experiment description, read from a JSON file. Relative paths resolve
/// against the directory holding the config.
struct RunConfig
{
  std::vector<std::filesystem::path> train_inputs;
  std::optional<std::filesystem::path> test_input; ///< absent: evaluate on the training cloud
  std::optional<std::filesystem::path> merge_schema;
  double downsample_min_distance = 0.1;
  double radius = 0.8;
  std::size_t min_neighbors = 10;
  FeatureSet feature_set = FeatureSet::six_f();
  ForestHyperparams forest;
  std::filesystem::path output_dir;
  FusedFormat export_format = FusedFormat::csv;
  bool export_suite = false;
  bool invalid_as_errors = false;
  PlanarityFormula planarity = PlanarityFormula::standard;
  unsigned threads = 0;

  /// Throws facade::Error before any work if the config is unusable.
  void validate() const;
};

RunConfig load_run_config(const std::filesystem::path& path);

/// Error raised inside a pipeline stage.
class StageError : public Error
{
public:
  StageError(std::string stage, const std::string& what)
    : Error("stage '" + stage + "': " + what)
    , stage_(std::move(stage))
  {}

  const std::string& stage() const noexcept { return stage_; }

private:
  std::string stage_;
};

struct ManifestEntry
{
  std::string artifact;
  std::vector<std::pair<std::string, std::string>> files; ///< relative path, sha256 hex
};

struct PipelineResult
{
  std::vector<ManifestEntry> manifest;
  double accuracy = 0.0;
  std::size_t excluded = 0;
};

/// Runs downsample -> extract -> train -> predict -> evaluate -> export and
/// writes `manifest.json` listing every artifact with its SHA-256. Files are
/// written with a `.partial` suffix and renamed once their stage succeeds.
PipelineResult run_pipeline(const RunConfig& config, std::ostream* log = nullptr);

std::string sha256_file(const std::filesystem::path& path);

} // namespace facade
