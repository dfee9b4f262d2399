#pragma once

#include "facade/point_cloud.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace facade {

double overall_accuracy(std::span<const ClassId> predicted, std::span<const ClassId> truth);

/// counts[i][j]: points of true class class_ids[i] predicted as class_ids[j].
struct ConfusionMatrix
{
  std::vector<ClassId> class_ids;
  std::vector<std::vector<std::uint64_t>> counts;
  std::uint64_t total = 0;

  std::uint64_t trace() const;
  double accuracy() const;
  std::uint64_t row_sum(std::size_t i) const;
  std::uint64_t col_sum(std::size_t j) const;
};

ConfusionMatrix confusion(std::span<const ClassId> predicted,
                          std::span<const ClassId> truth,
                          std::span<const ClassId> class_ids);

struct ClassMetrics
{
  ClassId id = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_defined = false;
  bool recall_defined = false;
  bool f1_defined = false;
};

/// Undefined ratios (zero denominators) are reported as 0 with the flag cleared.
std::vector<ClassMetrics> per_class_metrics(const ConfusionMatrix& matrix);

/// Predictions restricted by a validity mask.
struct MaskedLabels
{
  std::vector<ClassId> predicted;
  std::vector<ClassId> truth;
  std::size_t excluded = 0;
};

/// Drops rows whose features were invalid.
MaskedLabels apply_validity_mask(std::span<const ClassId> predicted,
                                 std::span<const ClassId> truth,
                                 std::span<const std::uint8_t> valid);

/// Accuracy over the kept rows, or, with `invalid_as_errors`, over all rows
/// with every excluded row counted as wrong.
double masked_accuracy(const MaskedLabels& masked, bool invalid_as_errors);

struct EvaluationReport
{
  ConfusionMatrix matrix;
  double accuracy = 0.0;
  std::map<ClassId, std::string> class_names;
  std::vector<std::pair<std::string, std::string>> metadata; ///< emitted in order
};

/// Writes `<dir>/confusion.csv` (metadata comments + matrix) and
/// `<dir>/report.txt` (human-readable table with per-class metrics).
void write_report(const EvaluationReport& report, const std::filesystem::path& dir);

std::string format_report_text(const EvaluationReport& report);

/// Parses a confusion.csv written by write_report.
EvaluationReport read_confusion_csv(const std::filesystem::path& path);

/// Prediction file: `# facade-pred v1` then `label,valid` rows.
void save_predictions(std::span<const ClassId> labels,
                      std::span<const std::uint8_t> valid,
                      const std::filesystem::path& path);

struct Predictions
{
  std::vector<ClassId> labels;
  std::vector<std::uint8_t> valid;
};

Predictions load_predictions(const std::filesystem::path& path);

} // namespace facade
