#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facade/error.hpp"
#include "facade/fusion_export.hpp"
#include "facade/synthetic.hpp"
#include "facade/text.hpp"
#include "test_util.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

using namespace facade;
using testutil::TempDir;

namespace {

std::vector<std::string>
data_lines(const std::filesystem::path& p)
{
  std::istringstream in(testutil::read_file(p));
  std::vector<std::string> out;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    out.push_back(line);
  }
  return out;
}

} // namespace

TEST_CASE("row arity")
{
  TempDir dir;
  LabeledPointCloud cloud;
  cloud.points = { { 1, 2, 3 } };
  cloud.labels = std::vector<ClassId>{ 4 };
  FeatureTable table;
  table.radius = 0.8;
  table.rows = { { 0.9, 0.1, 0.2, 3, 2, 1, 0.5, 0.6, 0.7 } };
  table.valid = { 1 };
  table.neighbor_counts = { 12 };

  export_fused(cloud, table, FeatureSet::six_f(), dir / "six.csv", FusedFormat::csv);
  auto rows = data_lines(dir / "six.csv");
  REQUIRE(rows.size() == 1);
  CHECK(text::split(rows[0], ',').size() == 10);

  export_fused(cloud, table, FeatureSet::xyz_only(), dir / "xyz.csv", FusedFormat::csv);
  rows = data_lines(dir / "xyz.csv");
  CHECK(text::split(rows[0], ',').size() == 4);

  const auto header = testutil::read_file(dir / "six.csv");
  CHECK(header.rfind("# facade-feats v1; radius=0.8; set=XYZ+6F; omitted=0", 0) == 0);
  CHECK(header.find("x,y,z,surface_variation,planarity,pca1,pca2,pca3,e2_y,label") != std::string::npos);
}

TEST_CASE("unlabeled cloud is rejected")
{
  LabeledPointCloud cloud;
  cloud.points = { { 1, 2, 3 } };
  FeatureTable table;
  table.rows.resize(1);
  table.valid = { 1 };
  table.neighbor_counts = { 12 };
  CHECK_THROWS_AS(build_fused(cloud, table, FeatureSet::six_f(), "c"), Error);
}

TEST_CASE("round trip of a 1000-point cloud")
{
  TempDir dir;
  const auto cloud = synthetic::generate(synthetic::Scene::facade, { 1000, 0.0, 0.1, 4 });
  const auto table = extract_features(cloud, { 0.8, 10 });
  const auto expected = build_fused(cloud, table, FeatureSet::nine_f(), "b");
  REQUIRE(expected.values.rows() == table.valid_count());

  export_fused(cloud, table, FeatureSet::nine_f(), dir / "f.csv", FusedFormat::csv, "b");
  const auto csv = read_fused(dir / "f.csv", FusedFormat::csv);
  CHECK(csv.columns == expected.columns);
  CHECK(csv.labels == expected.labels);
  CHECK(csv.omitted == cloud.size() - table.valid_count());
  CHECK(csv.source_id == "b");
  for (std::size_t i = 0; i < csv.values.rows(); ++i) {
    for (std::size_t k = 0; k < 3; ++k)
      CHECK(std::abs(csv.values(i, k) - expected.values(i, k)) <= 5e-7);
    for (std::size_t k = 3; k < csv.values.cols(); ++k)
      CHECK(csv.values(i, k) == expected.values(i, k));
  }

  export_fused(cloud, table, FeatureSet::nine_f(), dir / "f.bin", FusedFormat::packed_binary, "b");
  const auto bin = read_fused(dir / "f.bin", FusedFormat::packed_binary);
  CHECK(bin.columns == expected.columns);
  CHECK(bin.labels == expected.labels);
  CHECK(bin.set_name == "XYZ+9F");
  for (std::size_t i = 0; i < bin.values.rows(); ++i)
    for (std::size_t k = 0; k < bin.values.cols(); ++k)
      CHECK(bin.values(i, k) == static_cast<double>(static_cast<float>(expected.values(i, k))));
}

TEST_CASE("binary header layout")
{
  TempDir dir;
  const auto cloud = synthetic::generate(synthetic::Scene::plane, { 300 });
  const auto table = extract_features(cloud, {});
  export_fused(cloud, table, FeatureSet::six_f(), dir / "p.bin", FusedFormat::packed_binary);
  const auto bytes = testutil::read_file(dir / "p.bin");
  CHECK(bytes.substr(0, 16) == "FACADE-FEATS-BIN");
  std::uint32_t version = 0, cols = 0;
  std::uint64_t rows = 0;
  std::memcpy(&version, bytes.data() + 16, 4);
  std::memcpy(&cols, bytes.data() + 20, 4);
  std::memcpy(&rows, bytes.data() + 24, 8);
  CHECK(version == fused_format_version);
  CHECK(cols == 10);
  CHECK(rows == table.valid_count());

  auto bad = bytes;
  bad[16] = 9;
  testutil::write_file(dir / "v9.bin", bad);
  CHECK_THROWS_AS(read_fused(dir / "v9.bin", FusedFormat::packed_binary), FormatError);
}

TEST_CASE("experiment suite stays aligned")
{
  TempDir dir;
  auto cloud = synthetic::generate(synthetic::Scene::facade, { 1200 });
  cloud.points.push_back({ 100, 100, 100 }); // invalid row, omitted everywhere
  cloud.labels->push_back(1);
  const auto table = extract_features(cloud, {});
  for (const auto format : { FusedFormat::csv, FusedFormat::packed_binary }) {
    const auto paths = export_experiment_suite(cloud, table, (dir / "b59").string(), format);
    CHECK(paths[0].filename().string().rfind("b59_XYZ.", 0) == 0);
    const auto a = read_fused(paths[0], format);
    const auto b = read_fused(paths[1], format);
    const auto c = read_fused(paths[2], format);
    CHECK(a.columns.size() == 4);
    CHECK(b.columns.size() == 13);
    CHECK(c.columns.size() == 10);
    REQUIRE(a.values.rows() == b.values.rows());
    REQUIRE(a.values.rows() == c.values.rows());
    CHECK(a.values.rows() == table.valid_count());
    CHECK(a.labels == b.labels);
    CHECK(a.labels == c.labels);
    for (std::size_t i = 0; i < a.values.rows(); ++i)
      for (std::size_t k = 0; k < 3; ++k) {
        CHECK(a.values(i, k) == b.values(i, k));
        CHECK(a.values(i, k) == c.values(i, k));
      }
  }
}
