#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facade/error.hpp"
#include "facade/evaluation.hpp"
#include "test_util.hpp"

#include <map>
#include <random>

using namespace facade;

TEST_CASE("overall accuracy")
{
  const std::vector<ClassId> t{ 1, 2, 3, 4 };
  CHECK(overall_accuracy(t, t) == 1.0);
  const std::vector<ClassId> p{ 1, 1, 1, 1 };
  CHECK(overall_accuracy(p, t) == 0.25);
  CHECK_THROWS_AS(overall_accuracy(p, std::vector<ClassId>{ 1 }), Error);
  CHECK_THROWS_AS(overall_accuracy(std::vector<ClassId>{}, std::vector<ClassId>{}), Error);
}

TEST_CASE("confusion by hand")
{
  const std::vector<ClassId> truth{ 1, 2 }, pred{ 1, 1 }, ids{ 1, 2 };
  const auto m = confusion(pred, truth, ids);
  CHECK(m.counts[0][0] == 1);
  CHECK(m.counts[1][0] == 1);
  CHECK(m.counts[1][1] == 0);
  CHECK(m.accuracy() == 0.5);

  const auto diag = confusion(truth, truth, ids);
  CHECK(diag.counts[0][1] == 0);
  CHECK(diag.counts[1][0] == 0);
  CHECK(diag.trace() == 2);

  const std::vector<ClassId> unknown{ 1, 7 };
  try {
    confusion(unknown, truth, ids);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find('7') != std::string::npos);
  }
}

TEST_CASE("confusion totals against an independent tally")
{
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> u(1, 5);
  std::vector<ClassId> pred(1000), truth(1000);
  std::map<ClassId, std::uint64_t> tally;
  for (int i = 0; i < 1000; ++i) {
    pred[i] = u(rng);
    truth[i] = u(rng);
    ++tally[truth[i]];
  }
  const std::vector<ClassId> ids{ 1, 2, 3, 4, 5 };
  const auto m = confusion(pred, truth, ids);
  CHECK(m.total == 1000);
  for (std::size_t i = 0; i < ids.size(); ++i)
    CHECK(m.row_sum(i) == tally[ids[i]]);
}

TEST_CASE("per-class metrics")
{
  ConfusionMatrix m;
  m.class_ids = { 1, 2 };
  m.counts = { { 3, 1 }, { 2, 4 } };
  m.total = 10;
  const auto metrics = per_class_metrics(m);
  CHECK(metrics[0].recall == doctest::Approx(0.75));
  CHECK(metrics[0].precision == doctest::Approx(0.6));
  CHECK(metrics[0].f1 == doctest::Approx(2 * 0.75 * 0.6 / 1.35));

  m.class_ids = { 1, 2, 3 };
  m.counts = { { 5, 0, 0 }, { 0, 4, 0 }, { 0, 0, 0 } };
  m.total = 9;
  const auto d = per_class_metrics(m);
  CHECK(d[0].precision == 1.0);
  CHECK(d[1].f1 == 1.0);
  CHECK_FALSE(d[2].precision_defined);
  CHECK_FALSE(d[2].recall_defined);
  CHECK_FALSE(d[2].f1_defined);
}

TEST_CASE("validity mask")
{
  const std::vector<ClassId> pred{ 1, 2, 2, 1 }, truth{ 1, 2, 1, 1 };
  const std::vector<std::uint8_t> valid{ 1, 1, 0, 0 };
  const auto masked = apply_validity_mask(pred, truth, valid);
  CHECK(masked.predicted.size() == 2);
  CHECK(masked.excluded == 2);
  CHECK(masked_accuracy(masked, false) == 1.0);
  CHECK(masked_accuracy(masked, true) == 0.5);
}

TEST_CASE("report files")
{
  testutil::TempDir dir;
  EvaluationReport report;
  report.matrix.class_ids = { 1, 2 };
  report.matrix.counts = { { 3, 1 }, { 2, 4 } };
  report.matrix.total = 10;
  report.accuracy = 0.7;
  report.class_names = { { 1, "wall" }, { 2, "window" } };
  report.metadata = { { "feature_set", "XYZ+6F" } };
  write_report(report, dir / "eval");
  CHECK(std::filesystem::exists(dir / "eval" / "report.txt"));
  const auto back = read_confusion_csv(dir / "eval" / "confusion.csv");
  CHECK(back.matrix.counts == report.matrix.counts);
  CHECK(back.matrix.class_ids == report.matrix.class_ids);
  CHECK(back.accuracy == report.accuracy);
  CHECK(back.class_names == report.class_names);
  const auto txt = testutil::read_file(dir / "eval" / "report.txt");
  CHECK(txt.find("window") != std::string::npos);

  CHECK_THROWS_AS(write_report(EvaluationReport{}, dir / "empty"), Error);
}

TEST_CASE("prediction file round trip")
{
  testutil::TempDir dir;
  const std::vector<ClassId> labels{ 3, 1, 12 };
  const std::vector<std::uint8_t> valid{ 1, 0, 1 };
  save_predictions(labels, valid, dir / "p.csv");
  const auto back = load_predictions(dir / "p.csv");
  CHECK(back.labels == labels);
  CHECK(back.valid == valid);
}
