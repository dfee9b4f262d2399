#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "facade/error.hpp"
#include "facade/point_cloud.hpp"
#include "facade/text.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace facade;
using testutil::TempDir;
using testutil::write_file;

TEST_CASE("text file with labels")
{
  TempDir dir;
  write_file(dir / "a.txt", "0 0 0 1\n1 0 0 1\n0 1 0 2\n");
  const auto c = load_point_cloud(dir / "a.txt");
  REQUIRE(c.size() == 3);
  REQUIRE(c.has_labels());
  CHECK(*c.labels == std::vector<ClassId>{ 1, 1, 2 });
  CHECK(c.points[1] == Vec3{ 1, 0, 0 });
}

TEST_CASE("text file without labels")
{
  TempDir dir;
  write_file(dir / "a.txt", "0 0 0\n1 0 0\n0 1 0\n");
  const auto c = load_point_cloud(dir / "a.txt");
  CHECK(c.size() == 3);
  CHECK_FALSE(c.has_labels());
}

TEST_CASE("parse error cites the offending line")
{
  TempDir dir;
  write_file(dir / "a.txt", "0 0 abc 1\n");
  try {
    load_point_cloud(dir / "a.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 1);
  }

  write_file(dir / "b.txt", "# header\n0 0 0 1\n1 1 1 x\n");
  try {
    load_point_cloud(dir / "b.txt");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("inconsistent column counts are rejected")
{
  TempDir dir;
  write_file(dir / "a.txt", "0 0 0 1\n1 0 0\n");
  CHECK_THROWS_AS(load_point_cloud(dir / "a.txt"), ParseError);
  write_file(dir / "b.txt", "0 0\n");
  CHECK_THROWS_AS(load_point_cloud(dir / "b.txt"), ParseError);
  write_file(dir / "c.txt", "0 0 nan 1\n");
  CHECK_THROWS_AS(load_point_cloud(dir / "c.txt"), ParseError);
}

TEST_CASE("missing file")
{
  CHECK_THROWS_AS(load_point_cloud("/nonexistent/cloud.txt"), Error);
}

TEST_CASE("save/load round trip in both formats")
{
  TempDir dir;
  LabeledPointCloud c;
  c.points = { { 0.1234567, -2.5, 3.0 }, { 1e3, 0.0, -0.0000001 }, { -1.0, 2.0, 7.25 } };
  c.labels = std::vector<ClassId>{ 4, 1, 9 };
  c.class_names = { { 1, "wall" }, { 4, "molding" }, { 9, "other" } };
  for (const auto* name : { "c.txt", "c.ply" }) {
    save_point_cloud(c, dir / name);
    const auto back = load_point_cloud(dir / name);
    REQUIRE(back.size() == 3);
    CHECK(*back.labels == *c.labels);
    CHECK(back.class_names == c.class_names);
    for (std::size_t i = 0; i < 3; ++i)
      for (int k = 0; k < 3; ++k)
        CHECK(std::abs(back.points[i][k] - c.points[i][k]) <= 1e-6);
  }
  // Tiny negative values never print as "-0.000000".
  CHECK(testutil::read_file(dir / "c.txt").find("-0.000000") == std::string::npos);
}

TEST_CASE("empty cloud round trip")
{
  TempDir dir;
  LabeledPointCloud c;
  for (const auto* name : { "e.txt", "e.ply" }) {
    save_point_cloud(c, dir / name);
    CHECK(load_point_cloud(dir / name).empty());
  }
}

TEST_CASE("unlabeled text output has 3 columns")
{
  TempDir dir;
  LabeledPointCloud c;
  c.points = { { 1, 2, 3 }, { 4, 5, 6 } };
  save_point_cloud(c, dir / "u.txt", CloudFormat::xyz_label_text);
  std::istringstream in(testutil::read_file(dir / "u.txt"));
  std::string line;
  int rows = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#')
      continue;
    CHECK(text::split_whitespace(line).size() == 3);
    ++rows;
  }
  CHECK(rows == 2);
}

TEST_CASE("ply with classification property and extras")
{
  TempDir dir;
  write_file(dir / "s.ply",
             "ply\n"
             "format ascii 1.0\n"
             "comment generated elsewhere\n"
             "element vertex 2\n"
             "property float x\n"
             "property float y\n"
             "property float z\n"
             "property uchar red\n"
             "property float scalar_Classification\n"
             "element face 1\n"
             "property list uchar int vertex_indices\n"
             "end_header\n"
             "0 0 0 255 2.000000\n"
             "1 2 3 10 7\n"
             "3 0 1 1\n");
  const auto c = load_point_cloud(dir / "s.ply");
  REQUIRE(c.size() == 2);
  CHECK(*c.labels == std::vector<ClassId>{ 2, 7 });
  REQUIRE(c.extras.size() == 1);
  CHECK(c.extras[0].name == "red");
  CHECK(c.extras[0].values == std::vector<double>{ 255, 10 });
}

TEST_CASE("binary ply and non-integral labels are rejected")
{
  TempDir dir;
  write_file(dir / "b.ply", "ply\nformat binary_little_endian 1.0\nelement vertex 0\nend_header\n");
  CHECK_THROWS_AS(load_point_cloud(dir / "b.ply"), Error);
  write_file(dir / "f.ply",
             "ply\nformat ascii 1.0\nelement vertex 1\nproperty float x\nproperty float y\n"
             "property float z\nproperty float label\nend_header\n0 0 0 2.5\n");
  CHECK_THROWS_AS(load_point_cloud(dir / "f.ply"), ParseError);
  write_file(dir / "t.ply",
             "ply\nformat ascii 1.0\nelement vertex 2\nproperty float x\nproperty float y\n"
             "property float z\nend_header\n0 0 0\n");
  CHECK_THROWS_AS(load_point_cloud(dir / "t.ply"), ParseError);
}

TEST_CASE("class merge")
{
  ClassMergeSchema schema;
  schema.source_names = { { 1, "wall" }, { 2, "window" }, { 5, "molding" } };
  schema.mapping = { { 1, 1 }, { 2, 1 }, { 5, 4 } };
  schema.target_names = { { 1, "wall" }, { 4, "molding" } };

  SUBCASE("single point")
  {
    LabeledPointCloud c;
    c.points = { { 0, 0, 0 } };
    c.labels = std::vector<ClassId>{ 2 };
    const auto m = apply_class_merge(c, schema);
    CHECK(*m.labels == std::vector<ClassId>{ 1 });
    CHECK(m.class_names == schema.target_names);
  }
  SUBCASE("identity")
  {
    LabeledPointCloud c;
    c.points = { { 0, 0, 0 }, { 1, 1, 1 }, { 2, 2, 2 } };
    c.labels = std::vector<ClassId>{ 3, 1, 3 };
    c.class_names = { { 1, "a" }, { 3, "b" } };
    const auto m = apply_class_merge(c, ClassMergeSchema::identity(c.class_names));
    CHECK(*m.labels == *c.labels);
  }
  SUBCASE("orphan label")
  {
    LabeledPointCloud c;
    c.points = { { 0, 0, 0 } };
    c.labels = std::vector<ClassId>{ 99 };
    try {
      apply_class_merge(c, schema);
      FAIL("expected orphan error");
    } catch (const Error& e) {
      CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
  }
  SUBCASE("unlabeled cloud")
  {
    LabeledPointCloud c;
    c.points = { { 0, 0, 0 } };
    CHECK_THROWS_AS(apply_class_merge(c, schema), Error);
  }
}

TEST_CASE("merge schema validation")
{
  ClassMergeSchema s;
  s.source_names = { { 1, "a" }, { 2, "b" } };
  s.mapping = { { 1, 1 } };
  s.target_names = { { 1, "a" } };
  CHECK_THROWS_AS(s.validate(), Error); // source 2 unmapped
  s.mapping[2] = 7;
  CHECK_THROWS_AS(s.validate(), Error); // target 7 unnamed
  s.mapping[2] = 1;
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("merge schema file round trip and shipped default")
{
  TempDir dir;
  ClassMergeSchema s;
  s.mapping = { { 1, 1 }, { 2, 1 } };
  s.target_names = { { 1, "wall" } };
  save_merge_schema(s, dir / "s.json");
  const auto back = load_merge_schema(dir / "s.json");
  CHECK(back.mapping == s.mapping);
  CHECK(back.target_names == s.target_names);

  const auto def = load_merge_schema(FACADE_DATA_DIR "/default_merge_schema.json");
  CHECK(def.source_names.size() == 16);
  CHECK(def.mapping.size() == 16);
  CHECK_NOTHROW(def.validate());
  for (const auto& [src, dst] : def.mapping)
    CHECK(def.target_names.count(dst) == 1);
}

TEST_CASE("concatenate and subset")
{
  LabeledPointCloud a, b;
  a.points = { { 0, 0, 0 } };
  a.labels = std::vector<ClassId>{ 1 };
  a.class_names = { { 1, "x" } };
  b.points = { { 1, 1, 1 }, { 2, 2, 2 } };
  b.labels = std::vector<ClassId>{ 2, 2 };
  const auto c = concatenate({ a, b });
  CHECK(c.size() == 3);
  CHECK(*c.labels == std::vector<ClassId>{ 1, 2, 2 });
  const auto s = subset(c, { 2, 0 });
  CHECK(s.points[0] == Vec3{ 2, 2, 2 });
  CHECK(*s.labels == std::vector<ClassId>{ 2, 1 });

  LabeledPointCloud u;
  u.points = { { 5, 5, 5 } };
  CHECK_THROWS_AS(concatenate({ a, u }), Error);
}

TEST_CASE("strict number parsing")
{
  CHECK(text::parse_double("1.5") == 1.5);
  CHECK_FALSE(text::parse_double("1.5x").has_value());
  CHECK_FALSE(text::parse_double("").has_value());
  CHECK(text::parse_int("+7") == 7);
  CHECK_FALSE(text::parse_int("7.0").has_value());
  CHECK(text::fixed(-1e-9, 6) == "0.000000");
  CHECK(text::shortest(0.1) == "0.1");
}
