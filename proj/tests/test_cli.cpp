#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facade/evaluation.hpp"
#include "facade/features.hpp"
#include "facade/point_cloud.hpp"
#include "facade/text.hpp"
#include "test_util.hpp"

#include <sys/wait.h>

#include <cstdlib>
#include <sstream>

using namespace facade;
using testutil::TempDir;

namespace {

int
run(const std::string& args, const TempDir& dir)
{
  const std::string cmd = std::string(FACADE_CLI_PATH) + " " + args + " >" + (dir / "stdout.txt").string() +
                          " 2>" + (dir / "stderr.txt").string();
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string
q(const std::filesystem::path& p)
{
  return "'" + p.string() + "'";
}

} // namespace

TEST_CASE("usage errors exit with 2")
{
  TempDir dir;
  CHECK(run("", dir) == 2);
  CHECK(run("extract --bogus", dir) == 2);
  CHECK(run("extract --radius abc --in x --out y", dir) == 2);
  CHECK(run("gen-synthetic --n -5 --out x.txt", dir) == 2);
  CHECK(run("--help", dir) == 0);
  CHECK(testutil::read_file(dir / "stdout.txt").find("gen-synthetic") != std::string::npos);
  CHECK(run("extract --help", dir) == 0);
  CHECK(testutil::read_file(dir / "stdout.txt").find("0.8") != std::string::npos);
}

TEST_CASE("runtime failures exit with 1")
{
  TempDir dir;
  testutil::write_file(dir / "bad.txt", "0 0 abc 1\n");
  CHECK(run("extract --in " + q(dir / "bad.txt") + " --out " + q(dir / "f.csv"), dir) == 1);
  CHECK(testutil::read_file(dir / "stderr.txt").find(":1:") != std::string::npos);
}

TEST_CASE("generate, extract, train, predict, evaluate, export")
{
  TempDir dir;
  REQUIRE(run("gen-synthetic --scene plane --n 2000 --out " + q(dir / "plane.txt"), dir) == 0);
  const auto plane = load_point_cloud(dir / "plane.txt");
  CHECK(plane.size() == 2000);
  for (const auto& p : plane.points)
    CHECK(p[2] == 0.0);

  REQUIRE(run("extract --radius 0.8 --in " + q(dir / "plane.txt") + " --out " + q(dir / "plane.csv"), dir) == 0);
  const auto loaded = load_feature_table(dir / "plane.csv");
  double hi_x = 0.0, hi_y = 0.0;
  for (const auto& p : loaded.cloud.points) {
    hi_x = std::max(hi_x, p[0]);
    hi_y = std::max(hi_y, p[1]);
  }
  std::size_t interior = 0;
  for (std::size_t i = 0; i < loaded.cloud.size(); ++i) {
    const auto& p = loaded.cloud.points[i];
    if (p[0] < 0.8 || p[1] < 0.8 || p[0] > hi_x - 0.8 || p[1] > hi_y - 0.8)
      continue;
    ++interior;
    CHECK(loaded.table.rows[i][0] >= 0.95);
  }
  CHECK(interior > 100);

  REQUIRE(run("gen-synthetic --scene facade --n 3000 --seed 2 --out " + q(dir / "f.ply"), dir) == 0);
  REQUIRE(run("--threads 2 extract --in " + q(dir / "f.ply") + " --out " + q(dir / "f.csv"), dir) == 0);
  REQUIRE(run("train-rf --features " + q(dir / "f.csv") + " --set 9F --trees 20 --seed 4 --model " +
                q(dir / "m.rfm"),
              dir) == 0);

  REQUIRE(run("importance --model " + q(dir / "m.rfm") + " --top 6", dir) == 0);
  std::istringstream out(testutil::read_file(dir / "stdout.txt"));
  std::string line;
  double prev = 2.0;
  int printed = 0;
  while (std::getline(out, line) && line.rfind("selected:", 0) != 0) {
    const auto parts = text::split_whitespace(line);
    REQUIRE(parts.size() == 2);
    const double score = *text::parse_double(parts[1]);
    CHECK(score <= prev);
    prev = score;
    ++printed;
  }
  CHECK(printed == 12);
  CHECK(std::filesystem::exists(dir / "importance.csv"));

  REQUIRE(run("predict-rf --model " + q(dir / "m.rfm") + " --features " + q(dir / "f.csv") + " --out " +
                q(dir / "pred.csv"),
              dir) == 0);
  REQUIRE(run("evaluate --pred " + q(dir / "pred.csv") + " --truth " + q(dir / "f.ply") + " --out " +
                q(dir / "eval"),
              dir) == 0);
  const auto report = read_confusion_csv(dir / "eval" / "confusion.csv");
  CHECK(report.accuracy > 0.5);

  REQUIRE(run("export-fused --suite --features " + q(dir / "f.csv") + " --out " + q(dir / "b"), dir) == 0);
  CHECK(std::filesystem::exists(dir / "b_XYZ+6F.csv"));
  REQUIRE(run("downsample --min-dist 0.3 --in " + q(dir / "f.ply") + " --out " + q(dir / "d.txt"), dir) == 0);
  CHECK(load_point_cloud(dir / "d.txt").size() < 3000);
}

TEST_CASE("run subcommand")
{
  TempDir dir;
  REQUIRE(run("gen-synthetic --scene plane_line --n 500 --out " + q(dir / "s.ply"), dir) == 0);
  testutil::write_file(dir / "run.json", R"({"train": "s.ply", "downsample_min_distance": 0.005, "radius": 0.3,
    "min_neighbors": 5, "forest": {"n_trees": 5}, "seed": 1, "output_dir": "out"})");
  CHECK(run("run --config " + q(dir / "run.json"), dir) == 0);
  CHECK(std::filesystem::exists(dir / "out" / "manifest.json"));
  testutil::write_file(dir / "missing.json", R"({"train": "nope.ply", "seed": 1, "output_dir": "out2"})");
  CHECK(run("run --config " + q(dir / "missing.json"), dir) == 1);
  CHECK_FALSE(std::filesystem::exists(dir / "out2"));
}
