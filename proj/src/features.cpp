#include "facade/features.hpp"

#include "facade/error.hpp"
#include "facade/parallel.hpp"
#include "facade/text.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace facade {

CovarianceFeatures
covariance_features(const NeighborhoodEigen& eigen, PlanarityFormula formula)
{
  const auto [l1, l2, l3] = eigen.eigenvalues;
  const double sum = l1 + l2 + l3;
  CovarianceFeatures f;
  if (!(l1 > 0.0) || !(sum > 0.0))
    return f;
  f.valid = true;
  f.planarity = formula == PlanarityFormula::standard ? (l2 - l3) / l1 : (l2 - l1) / l1;
  f.omnivariance = std::cbrt(l1 * l2 * l3);
  f.surface_variation = l3 / sum;
  f.pca1 = l1;
  f.pca2 = l2;
  f.pca3 = l3;
  f.e2 = eigen.eigenvectors[1];
  return f;
}

std::size_t
FeatureTable::valid_count() const noexcept
{
  return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), std::uint8_t{ 1 }));
}

std::size_t
FeatureTable::column_index(std::string_view name)
{
  for (std::size_t k = 0; k < feature_columns.size(); ++k)
    if (feature_columns[k] == name)
      return k;
  throw Error("unknown feature column '" + std::string(name) + "'");
}

FeatureTable
extract_features(const LabeledPointCloud& cloud, const ExtractOptions& options)
{
  return extract_features(build_index(cloud), options);
}

FeatureTable
extract_features(const KdIndex& index, const ExtractOptions& options)
{
  if (!std::isfinite(options.radius) || !(options.radius > 0.0))
    throw Error("feature radius must be finite and > 0");
  if (options.min_neighbors < 3)
    throw Error("min_neighbors must be >= 3");

  const std::size_t n = index.point_count();
  FeatureTable table;
  table.radius = options.radius;
  table.min_neighbors = options.min_neighbors;
  table.rows.assign(n, {});
  table.valid.assign(n, 0);
  table.neighbor_counts.assign(n, 0);

  const auto& points = index.points();
  parallel_for(n, options.threads, [&](std::size_t begin, std::size_t end) {
    std::vector<std::size_t> neighbors;
    std::vector<Vec3> coords;
    for (std::size_t i = begin; i < end; ++i) {
      index.radius_query(points[i], options.radius, neighbors);
      table.neighbor_counts[i] = static_cast<std::uint32_t>(neighbors.size());
      if (neighbors.size() < options.min_neighbors)
        continue;
      coords.clear();
      for (const auto j : neighbors)
        coords.push_back(points[j]);
      auto eigen = eigen_decompose(structure_tensor(coords));
      eigen.neighbor_count = neighbors.size();
      const auto f = covariance_features(eigen, options.planarity);
      if (!f.valid)
        continue;
      table.rows[i] = { f.planarity, f.omnivariance, f.surface_variation, f.pca1, f.pca2,
                        f.pca3,      f.e2[0],        f.e2[1],             f.e2[2] };
      table.valid[i] = 1;
    }
  });
  return table;
}

FeatureSet
FeatureSet::xyz_only()
{
  return { "XYZ", {} };
}

FeatureSet
FeatureSet::nine_f()
{
  return { "XYZ+9F",
           { "planarity", "surface_variation", "omnivariance", "pca1", "pca2", "pca3", "e2_x",
             "e2_y", "e2_z" } };
}

FeatureSet
FeatureSet::six_f()
{
  return { "XYZ+6F", { "surface_variation", "planarity", "pca1", "pca2", "pca3", "e2_y" } };
}

FeatureSet
FeatureSet::parse(std::string_view selection)
{
  const auto s = text::trim(selection);
  if (s == "XYZ" || s == "xyz" || s.empty())
    return xyz_only();
  if (s == "9F" || s == "NINE_F" || s == "XYZ+9F")
    return nine_f();
  if (s == "6F" || s == "SIX_F" || s == "XYZ+6F")
    return six_f();
  FeatureSet set;
  for (const auto part : text::split(s, ',')) {
    const auto name = text::trim(part);
    FeatureTable::column_index(name);
    set.columns.emplace_back(name);
  }
  set.name = "XYZ+" + std::to_string(set.columns.size()) + "F";
  return set;
}

SelectedMatrix
select_columns(const LabeledPointCloud& cloud,
               const FeatureTable& table,
               const FeatureSet& set,
               bool include_xyz)
{
  if (table.size() != cloud.size())
    throw Error("feature table has " + std::to_string(table.size()) + " rows, cloud has " +
                std::to_string(cloud.size()) + " points");
  std::vector<std::size_t> indices;
  for (const auto& name : set.columns)
    indices.push_back(FeatureTable::column_index(name));

  SelectedMatrix out;
  if (include_xyz)
    out.column_names = { "x", "y", "z" };
  out.column_names.insert(out.column_names.end(), set.columns.begin(), set.columns.end());
  out.rows = Matrix(table.size(), out.column_names.size());
  out.valid = table.valid;
  for (std::size_t i = 0; i < table.size(); ++i) {
    auto row = out.rows.row(i);
    std::size_t c = 0;
    if (include_xyz)
      for (const double v : cloud.points[i])
        row[c++] = v;
    for (const auto k : indices)
      row[c++] = table.valid[i] ? table.rows[i][k] : 0.0;
  }
  return out;
}

namespace {

constexpr std::string_view table_magic = "# facade-feats v1";

} // namespace

void
save_feature_table(const LabeledPointCloud& cloud,
                   const FeatureTable& table,
                   const std::filesystem::path& path)
{
  if (table.size() != cloud.size())
    throw Error("feature table is not aligned with the cloud");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string());
  const std::size_t omitted = table.size() - table.valid_count();
  out << table_magic << "; radius=" << text::shortest(table.radius) << "; set=table; omitted="
      << omitted << '\n'
      << "# kind=feature-table; min_neighbors=" << table.min_neighbors << '\n';
  const bool labeled = cloud.has_labels();
  if (labeled)
    for (const auto& [id, name] : cloud.class_names)
      out << "# class " << id << ' ' << name << '\n';
  out << "x,y,z";
  for (const auto c : feature_columns)
    out << ',' << c;
  out << ",neighbors,valid" << (labeled ? ",label" : "") << '\n';
  std::string line;
  for (std::size_t i = 0; i < table.size(); ++i) {
    line.clear();
    for (int k = 0; k < 3; ++k) {
      line += text::fixed(cloud.points[i][k], 6);
      line += ',';
    }
    for (const double v : table.rows[i]) {
      line += text::shortest(v);
      line += ',';
    }
    line += std::to_string(table.neighbor_counts[i]);
    line += table.valid[i] ? ",1" : ",0";
    if (labeled) {
      line += ',';
      line += std::to_string((*cloud.labels)[i]);
    }
    line += '\n';
    out << line;
  }
  out.flush();
  if (!out)
    throw Error("write failed for " + path.string());
}

LoadedFeatureTable
load_feature_table(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path.string());
  const std::string source = path.string();
  LoadedFeatureTable result;
  auto& cloud = result.cloud;
  auto& table = result.table;
  std::vector<ClassId> labels;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  bool labeled = false;
  constexpr std::size_t base_columns = 3 + feature_columns.size() + 2;

  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty())
      continue;
    if (body.front() == '#') {
      if (line_no == 1 && body.substr(0, table_magic.size()) != table_magic)
        throw ParseError(source, line_no, "not a facade feature table");
      for (const auto part : text::split(body.substr(1), ';')) {
        const auto kv = text::trim(part);
        if (kv.starts_with("radius="))
          table.radius = text::parse_double(kv.substr(7)).value_or(0.0);
        else if (kv.starts_with("min_neighbors="))
          table.min_neighbors = static_cast<std::size_t>(text::parse_int(kv.substr(14)).value_or(0));
      }
      const auto tokens = text::split_whitespace(body.substr(1));
      if (tokens.size() >= 3 && tokens[0] == "class") {
        if (const auto id = text::parse_int(tokens[1]))
          cloud.class_names[static_cast<ClassId>(*id)] =
            std::string(text::trim(body.substr(body.find(tokens[2]))));
      }
      continue;
    }
    const auto fields = text::split(body, ',');
    if (!header_seen) {
      header_seen = true;
      if (fields.size() != base_columns && fields.size() != base_columns + 1)
        throw ParseError(source, line_no, "unexpected feature-table header");
      labeled = fields.size() == base_columns + 1;
      continue;
    }
    if (fields.size() != base_columns + (labeled ? 1 : 0))
      throw ParseError(source, line_no, "wrong field count " + std::to_string(fields.size()));
    const auto num = [&](std::size_t k) {
      const auto v = text::parse_double(text::trim(fields[k]));
      if (!v)
        throw ParseError(source, line_no, "non-numeric field '" + std::string(fields[k]) + "'");
      return *v;
    };
    cloud.points.push_back({ num(0), num(1), num(2) });
    std::array<double, feature_columns.size()> row{};
    for (std::size_t k = 0; k < row.size(); ++k)
      row[k] = num(3 + k);
    table.rows.push_back(row);
    table.neighbor_counts.push_back(static_cast<std::uint32_t>(num(3 + row.size())));
    table.valid.push_back(num(4 + row.size()) != 0.0 ? 1 : 0);
    if (labeled) {
      const auto label = text::parse_int(text::trim(fields[base_columns]));
      if (!label || *label < 0)
        throw ParseError(source, line_no, "bad label");
      labels.push_back(static_cast<ClassId>(*label));
    }
  }
  if (labeled) {
    for (const auto id : labels)
      cloud.class_names.try_emplace(id, std::to_string(id));
    cloud.labels = std::move(labels);
  }
  return result;
}

} // namespace facade
