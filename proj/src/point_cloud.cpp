#include "facade/point_cloud.hpp"

#include "facade/error.hpp"
#include "facade/text.hpp"

#include <json.hpp>

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

namespace facade {

namespace {

std::string
system_cause()
{
  return std::strerror(errno);
}

std::ifstream
open_for_read(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path.string() + ": " + system_cause());
  return in;
}

std::ofstream
open_for_write(const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string() + ": " + system_cause());
  return out;
}

void
finish_write(std::ofstream& out, const std::filesystem::path& path)
{
  out.flush();
  if (!out)
    throw Error("write failed for " + path.string() + ": " + system_cause());
  out.close();
}

// Labels may be written as "3" or "3.000000" (CloudCompare stores scalar fields as float).
std::optional<ClassId>
parse_label(std::string_view token)
{
  if (auto i = text::parse_int(token)) {
    if (*i < 0 || *i > std::numeric_limits<ClassId>::max())
      return std::nullopt;
    return static_cast<ClassId>(*i);
  }
  if (auto d = text::parse_double(token)) {
    if (std::isfinite(*d) && *d >= 0.0 && *d == std::floor(*d) &&
        *d <= std::numeric_limits<ClassId>::max())
      return static_cast<ClassId>(*d);
  }
  return std::nullopt;
}

// "class <id> <name...>" inside a comment.
void
parse_class_comment(std::string_view body, std::map<ClassId, std::string>& names)
{
  const auto tokens = text::split_whitespace(body);
  if (tokens.size() < 3 || tokens[0] != "class")
    return;
  const auto id = text::parse_int(tokens[1]);
  if (!id || *id < 0)
    return;
  const auto name_start = body.find(tokens[2]);
  names[static_cast<ClassId>(*id)] = std::string(text::trim(body.substr(name_start)));
}

void
fill_class_names(LabeledPointCloud& cloud)
{
  if (!cloud.labels)
    return;
  for (const ClassId id : *cloud.labels)
    cloud.class_names.try_emplace(id, std::to_string(id));
}

LabeledPointCloud
load_text(const std::filesystem::path& path)
{
  auto in = open_for_read(path);
  const std::string source = path.string();
  LabeledPointCloud cloud;
  std::vector<ClassId> labels;
  std::size_t columns = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty())
      continue;
    if (body.front() == '#') {
      parse_class_comment(text::trim(body.substr(1)), cloud.class_names);
      continue;
    }
    const auto tokens = text::split_whitespace(body);
    if (columns == 0) {
      if (tokens.size() != 3 && tokens.size() != 4)
        throw ParseError(source, line_no,
                         "expected 3 or 4 columns, got " + std::to_string(tokens.size()));
      columns = tokens.size();
    } else if (tokens.size() != columns) {
      throw ParseError(source, line_no,
                       "expected " + std::to_string(columns) + " columns, got " +
                         std::to_string(tokens.size()));
    }
    Vec3 p{};
    for (std::size_t k = 0; k < 3; ++k) {
      const auto v = text::parse_double(tokens[k]);
      if (!v)
        throw ParseError(source, line_no, "non-numeric coordinate '" + std::string(tokens[k]) + "'");
      if (!std::isfinite(*v))
        throw ParseError(source, line_no, "non-finite coordinate");
      p[k] = *v;
    }
    cloud.points.push_back(p);
    if (columns == 4) {
      const auto label = parse_label(tokens[3]);
      if (!label)
        throw ParseError(source, line_no,
                         "label '" + std::string(tokens[3]) + "' is not a non-negative integer");
      labels.push_back(*label);
    }
  }
  if (columns == 4)
    cloud.labels = std::move(labels);
  fill_class_names(cloud);
  return cloud;
}

struct PlyElement
{
  std::string name;
  std::size_t count = 0;
  std::vector<std::string> properties;
  bool has_list = false;
};

LabeledPointCloud
load_ply(const std::filesystem::path& path)
{
  auto in = open_for_read(path);
  const std::string source = path.string();
  LabeledPointCloud cloud;
  std::vector<PlyElement> elements;
  std::string line;
  std::size_t line_no = 0;

  const auto next_line = [&]() -> bool {
    if (!std::getline(in, line))
      return false;
    ++line_no;
    return true;
  };

  if (!next_line() || text::trim(line) != "ply")
    throw ParseError(source, line_no, "missing 'ply' magic line");
  bool ended = false;
  while (next_line()) {
    const auto body = text::trim(line);
    const auto tokens = text::split_whitespace(body);
    if (tokens.empty())
      continue;
    if (tokens[0] == "end_header") {
      ended = true;
      break;
    }
    if (tokens[0] == "format") {
      if (tokens.size() < 2 || tokens[1] != "ascii")
        throw ParseError(source, line_no, "only ASCII PLY is supported");
    } else if (tokens[0] == "comment") {
      parse_class_comment(text::trim(body.substr(std::string_view("comment").size())),
                          cloud.class_names);
    } else if (tokens[0] == "obj_info") {
      continue;
    } else if (tokens[0] == "element") {
      if (tokens.size() != 3)
        throw ParseError(source, line_no, "malformed element line");
      const auto count = text::parse_int(tokens[2]);
      if (!count || *count < 0)
        throw ParseError(source, line_no, "bad element count");
      elements.push_back({ std::string(tokens[1]), static_cast<std::size_t>(*count), {}, false });
    } else if (tokens[0] == "property") {
      if (elements.empty())
        throw ParseError(source, line_no, "property before any element");
      if (tokens.size() >= 2 && tokens[1] == "list") {
        elements.back().has_list = true;
        elements.back().properties.emplace_back(tokens.back());
      } else if (tokens.size() == 3) {
        elements.back().properties.emplace_back(tokens[2]);
      } else {
        throw ParseError(source, line_no, "malformed property line");
      }
    } else {
      throw ParseError(source, line_no, "unknown header keyword '" + std::string(tokens[0]) + "'");
    }
  }
  if (!ended)
    throw ParseError(source, line_no, "missing end_header");

  for (const auto& element : elements) {
    if (element.name != "vertex") {
      // Other elements precede or follow the vertices; one line per instance in ASCII.
      for (std::size_t i = 0; i < element.count; ++i)
        if (!next_line())
          throw ParseError(source, line_no, "truncated element '" + element.name + "'");
      continue;
    }
    if (element.has_list)
      throw ParseError(source, line_no, "list properties on vertices are not supported");

    const auto& props = element.properties;
    const auto find = [&](std::string_view name) -> std::optional<std::size_t> {
      for (std::size_t k = 0; k < props.size(); ++k)
        if (props[k] == name)
          return k;
      return std::nullopt;
    };
    const auto ix = find("x"), iy = find("y"), iz = find("z");
    if (!ix || !iy || !iz)
      throw ParseError(source, line_no, "vertex element lacks x/y/z");
    auto ilabel = find("scalar_Classification");
    if (!ilabel)
      ilabel = find("label");

    std::vector<std::size_t> extra_columns;
    for (std::size_t k = 0; k < props.size(); ++k) {
      if (k == *ix || k == *iy || k == *iz || (ilabel && k == *ilabel))
        continue;
      extra_columns.push_back(k);
      cloud.extras.push_back({ props[k], {} });
    }

    std::vector<ClassId> labels;
    cloud.points.reserve(element.count);
    for (std::size_t i = 0; i < element.count; ++i) {
      if (!next_line())
        throw ParseError(source, line_no, "expected " + std::to_string(element.count) +
                                            " vertices, file ends after " + std::to_string(i));
      const auto tokens = text::split_whitespace(line);
      if (tokens.size() != props.size())
        throw ParseError(source, line_no,
                         "expected " + std::to_string(props.size()) + " values, got " +
                           std::to_string(tokens.size()));
      Vec3 p{};
      const std::size_t axes[3] = { *ix, *iy, *iz };
      for (std::size_t k = 0; k < 3; ++k) {
        const auto v = text::parse_double(tokens[axes[k]]);
        if (!v)
          throw ParseError(source, line_no,
                           "non-numeric coordinate '" + std::string(tokens[axes[k]]) + "'");
        if (!std::isfinite(*v))
          throw ParseError(source, line_no, "non-finite coordinate");
        p[k] = *v;
      }
      cloud.points.push_back(p);
      if (ilabel) {
        const auto label = parse_label(tokens[*ilabel]);
        if (!label)
          throw ParseError(source, line_no,
                           "label '" + std::string(tokens[*ilabel]) +
                             "' is not a non-negative integer");
        labels.push_back(*label);
      }
      for (std::size_t e = 0; e < extra_columns.size(); ++e) {
        const auto v = text::parse_double(tokens[extra_columns[e]]);
        if (!v)
          throw ParseError(source, line_no,
                           "non-numeric value for '" + props[extra_columns[e]] + "'");
        cloud.extras[e].values.push_back(*v);
      }
    }
    if (ilabel)
      cloud.labels = std::move(labels);
  }
  fill_class_names(cloud);
  return cloud;
}

void
write_class_comments(std::ostream& out, const LabeledPointCloud& cloud, std::string_view prefix)
{
  for (const auto& [id, name] : cloud.class_names)
    out << prefix << "class " << id << ' ' << name << '\n';
}

} // namespace

void
LabeledPointCloud::validate() const
{
  for (std::size_t i = 0; i < points.size(); ++i)
    for (const double c : points[i])
      if (!std::isfinite(c))
        throw Error("point " + std::to_string(i) + " has a non-finite coordinate");
  if (!labels)
    return;
  if (labels->size() != points.size())
    throw Error("label count " + std::to_string(labels->size()) + " != point count " +
                std::to_string(points.size()));
  for (const ClassId id : *labels) {
    if (id < 0)
      throw Error("negative class id " + std::to_string(id));
    if (!class_names.contains(id))
      throw Error("class id " + std::to_string(id) + " has no name");
  }
}

std::string
LabeledPointCloud::class_name(ClassId id) const
{
  const auto it = class_names.find(id);
  return it == class_names.end() ? std::to_string(id) : it->second;
}

void
ClassMergeSchema::validate() const
{
  for (const auto& [source, target] : mapping)
    if (!target_names.contains(target))
      throw Error("merge target " + std::to_string(target) + " (from source class " +
                  std::to_string(source) + ") has no target name");
  for (const auto& [source, name] : source_names)
    if (!mapping.contains(source))
      throw Error("source class " + std::to_string(source) + " (" + name + ") has no merge target");
}

ClassMergeSchema
ClassMergeSchema::identity(const std::map<ClassId, std::string>& names)
{
  ClassMergeSchema schema;
  schema.source_names = names;
  schema.target_names = names;
  for (const auto& [id, name] : names)
    schema.mapping[id] = id;
  return schema;
}

CloudFormat
format_from_path(const std::filesystem::path& path)
{
  auto ext = path.extension().string();
  for (auto& c : ext)
    c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return ext == ".ply" ? CloudFormat::ascii_ply : CloudFormat::xyz_label_text;
}

LabeledPointCloud
load_point_cloud(const std::filesystem::path& path, CloudFormat format)
{
  return format == CloudFormat::ascii_ply ? load_ply(path) : load_text(path);
}

void
save_point_cloud(const LabeledPointCloud& cloud,
                 const std::filesystem::path& path,
                 CloudFormat format)
{
  cloud.validate();
  auto out = open_for_write(path);
  const bool labeled = cloud.has_labels();
  if (format == CloudFormat::ascii_ply) {
    out << "ply\nformat ascii 1.0\n";
    if (labeled)
      write_class_comments(out, cloud, "comment ");
    out << "element vertex " << cloud.size() << '\n'
        << "property double x\nproperty double y\nproperty double z\n";
    if (labeled)
      out << "property int label\n";
    out << "end_header\n";
  } else {
    out << (labeled ? "# x y z label\n" : "# x y z\n");
    if (labeled)
      write_class_comments(out, cloud, "# ");
  }
  std::string row;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& p = cloud.points[i];
    row = text::fixed(p[0], 6);
    row += ' ';
    row += text::fixed(p[1], 6);
    row += ' ';
    row += text::fixed(p[2], 6);
    if (labeled) {
      row += ' ';
      row += std::to_string((*cloud.labels)[i]);
    }
    row += '\n';
    out << row;
  }
  finish_write(out, path);
}

LabeledPointCloud
apply_class_merge(const LabeledPointCloud& cloud, const ClassMergeSchema& schema)
{
  if (!cloud.labels)
    throw Error("class merge requires a labeled cloud");
  schema.validate();
  LabeledPointCloud out;
  out.points = cloud.points;
  out.extras = cloud.extras;
  out.class_names = schema.target_names;
  std::vector<ClassId> merged;
  merged.reserve(cloud.labels->size());
  for (const ClassId id : *cloud.labels) {
    const auto it = schema.mapping.find(id);
    if (it == schema.mapping.end())
      throw Error("class " + std::to_string(id) + " (" + cloud.class_name(id) +
                  ") is not covered by the merge schema");
    merged.push_back(it->second);
  }
  out.labels = std::move(merged);
  return out;
}

namespace {

std::map<ClassId, std::string>
read_name_map(const nlohmann::json& obj, const std::string& key, const std::string& source)
{
  std::map<ClassId, std::string> names;
  if (!obj.contains(key))
    return names;
  if (!obj.at(key).is_object())
    throw ParseError(source, 0, "'" + key + "' must be an object");
  for (const auto& [k, v] : obj.at(key).items()) {
    const auto id = text::parse_int(k);
    if (!id || *id < 0 || !v.is_string())
      throw ParseError(source, 0, "bad entry '" + k + "' in '" + key + "'");
    names[static_cast<ClassId>(*id)] = v.get<std::string>();
  }
  return names;
}

} // namespace

ClassMergeSchema
load_merge_schema(const std::filesystem::path& path)
{
  auto in = open_for_read(path);
  const std::string source = path.string();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  if (!doc.is_object() || !doc.contains("mapping") || !doc.contains("target_names"))
    throw ParseError(source, 0, "merge schema needs 'mapping' and 'target_names'");

  ClassMergeSchema schema;
  schema.source_names = read_name_map(doc, "source_names", source);
  schema.target_names = read_name_map(doc, "target_names", source);
  if (!doc.at("mapping").is_object())
    throw ParseError(source, 0, "'mapping' must be an object");
  for (const auto& [k, v] : doc.at("mapping").items()) {
    const auto id = text::parse_int(k);
    if (!id || *id < 0 || !v.is_number_integer() || v.get<std::int64_t>() < 0)
      throw ParseError(source, 0, "bad mapping entry '" + k + "'");
    schema.mapping[static_cast<ClassId>(*id)] = v.get<ClassId>();
  }
  schema.validate();
  return schema;
}

void
save_merge_schema(const ClassMergeSchema& schema, const std::filesystem::path& path)
{
  nlohmann::json doc;
  const auto names_json = [](const std::map<ClassId, std::string>& names) {
    nlohmann::json obj = nlohmann::json::object();
    for (const auto& [id, name] : names)
      obj[std::to_string(id)] = name;
    return obj;
  };
  if (!schema.source_names.empty())
    doc["source_names"] = names_json(schema.source_names);
  nlohmann::json mapping = nlohmann::json::object();
  for (const auto& [s, t] : schema.mapping)
    mapping[std::to_string(s)] = t;
  doc["mapping"] = mapping;
  doc["target_names"] = names_json(schema.target_names);
  auto out = open_for_write(path);
  out << doc.dump(2) << '\n';
  finish_write(out, path);
}

LabeledPointCloud
concatenate(const std::vector<LabeledPointCloud>& clouds)
{
  LabeledPointCloud out;
  if (clouds.empty())
    return out;
  const bool labeled = clouds.front().has_labels();
  std::vector<ClassId> labels;
  for (const auto& c : clouds) {
    if (c.has_labels() != labeled)
      throw Error("cannot concatenate labeled and unlabeled clouds");
    out.points.insert(out.points.end(), c.points.begin(), c.points.end());
    if (labeled)
      labels.insert(labels.end(), c.labels->begin(), c.labels->end());
    for (const auto& [id, name] : c.class_names) {
      const auto [it, inserted] = out.class_names.try_emplace(id, name);
      if (!inserted && it->second != name)
        throw Error("class " + std::to_string(id) + " is named both '" + it->second + "' and '" +
                    name + "'");
    }
  }
  if (labeled)
    out.labels = std::move(labels);
  return out;
}

LabeledPointCloud
subset(const LabeledPointCloud& cloud, const std::vector<std::size_t>& indices)
{
  LabeledPointCloud out;
  out.class_names = cloud.class_names;
  out.points.reserve(indices.size());
  for (const auto i : indices)
    out.points.push_back(cloud.points.at(i));
  if (cloud.labels) {
    std::vector<ClassId> labels;
    labels.reserve(indices.size());
    for (const auto i : indices)
      labels.push_back((*cloud.labels)[i]);
    out.labels = std::move(labels);
  }
  for (const auto& extra : cloud.extras) {
    ExtraAttribute e{ extra.name, {} };
    e.values.reserve(indices.size());
    for (const auto i : indices)
      e.values.push_back(extra.values[i]);
    out.extras.push_back(std::move(e));
  }
  return out;
}

} // namespace facade
