#include "facade/fusion_export.hpp"

#include "facade/error.hpp"
#include "facade/text.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

namespace facade {

namespace {

constexpr char binary_magic[16] = { 'F', 'A', 'C', 'A', 'D', 'E', '-', 'F',
                                    'E', 'A', 'T', 'S', '-', 'B', 'I', 'N' };

std::string
header_text(const FusionDataset& data)
{
  std::ostringstream os;
  os << "# facade-feats v" << fused_format_version << "; radius=" << text::shortest(data.radius)
     << "; set=" << data.set_name << "; omitted=" << data.omitted << '\n'
     << "# source=" << data.source_id << "; toolkit=" << data.toolkit
     << "; values=raw (no normalization)\n";
  for (std::size_t i = 0; i < data.columns.size(); ++i)
    os << (i ? "," : "") << data.columns[i];
  os << '\n';
  return os.str();
}

void
put_u32(std::string& out, std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void
put_u64(std::string& out, std::uint64_t v)
{
  for (int i = 0; i < 8; ++i)
    out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t
get_le(const std::string& in, std::size_t& pos, int bytes, const std::string& source)
{
  if (pos + static_cast<std::size_t>(bytes) > in.size())
    throw FormatError(source + ": truncated fused file");
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i)
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + i])) << (8 * i);
  pos += static_cast<std::size_t>(bytes);
  return v;
}

// Parses the "# key=value; key=value" header lines into `data`.
void
parse_header_line(std::string_view body, FusionDataset& data)
{
  for (const auto part : text::split(body, ';')) {
    const auto kv = text::trim(part);
    const auto eq = kv.find('=');
    if (eq == std::string_view::npos)
      continue;
    const auto key = kv.substr(0, eq);
    const std::string value(kv.substr(eq + 1));
    if (key == "radius")
      data.radius = text::parse_double(value).value_or(0.0);
    else if (key == "set")
      data.set_name = value;
    else if (key == "omitted")
      data.omitted = static_cast<std::size_t>(text::parse_int(value).value_or(0));
    else if (key == "source")
      data.source_id = value;
    else if (key == "toolkit")
      data.toolkit = value;
  }
}

} // namespace

FusionDataset
build_fused(const LabeledPointCloud& cloud,
            const FeatureTable& table,
            const FeatureSet& set,
            const std::string& source_id)
{
  if (!cloud.has_labels())
    throw Error("fusion export requires a labeled cloud");
  const auto selected = select_columns(cloud, table, set, true);
  FusionDataset data;
  data.columns = selected.column_names;
  data.columns.emplace_back("label");
  data.source_id = source_id;
  data.radius = table.radius;
  data.set_name = set.name;
  data.toolkit = std::string(toolkit_version);
  for (std::size_t i = 0; i < table.size(); ++i) {
    if (!selected.valid[i]) {
      ++data.omitted;
      continue;
    }
    data.values.push_row(selected.rows.row(i));
    data.labels.push_back((*cloud.labels)[i]);
  }
  if (data.values.rows() == 0)
    data.values = Matrix(0, data.columns.size() - 1);
  return data;
}

void
write_fused(const FusionDataset& data, const std::filesystem::path& path, FusedFormat format)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string() + ": " + std::strerror(errno));
  const std::string header = header_text(data);
  const std::size_t n_values = data.columns.size() - 1;

  if (format == FusedFormat::csv) {
    out << header;
    std::string line;
    for (std::size_t i = 0; i < data.values.rows(); ++i) {
      line.clear();
      const auto row = data.values.row(i);
      for (std::size_t k = 0; k < n_values; ++k) {
        line += k < 3 ? text::fixed(row[k], 6) : text::shortest(row[k]);
        line += ',';
      }
      line += std::to_string(data.labels[i]);
      line += '\n';
      out << line;
    }
  } else {
    std::string buf(binary_magic, sizeof binary_magic);
    put_u32(buf, fused_format_version);
    put_u32(buf, static_cast<std::uint32_t>(data.columns.size()));
    put_u64(buf, data.values.rows());
    for (std::size_t i = 0; i < data.values.rows(); ++i) {
      const auto row = data.values.row(i);
      for (std::size_t k = 0; k < n_values; ++k) {
        const auto f = static_cast<float>(row[k]);
        std::uint32_t bits;
        std::memcpy(&bits, &f, 4);
        put_u32(buf, bits);
      }
      put_u32(buf, static_cast<std::uint32_t>(data.labels[i]));
    }
    put_u32(buf, static_cast<std::uint32_t>(header.size()));
    buf += header;
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
  out.flush();
  if (!out)
    throw Error("write failed for " + path.string());
}

void
export_fused(const LabeledPointCloud& cloud,
             const FeatureTable& table,
             const FeatureSet& set,
             const std::filesystem::path& path,
             FusedFormat format,
             const std::string& source_id)
{
  write_fused(build_fused(cloud, table, set, source_id), path, format);
}

FusionDataset
read_fused(const std::filesystem::path& path, FusedFormat format)
{
  const std::string source = path.string();
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + source);
  std::string content((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  FusionDataset data;

  if (format == FusedFormat::packed_binary) {
    if (content.size() < 16 || std::memcmp(content.data(), binary_magic, 16) != 0)
      throw FormatError(source + ": bad magic");
    std::size_t pos = 16;
    const auto version = get_le(content, pos, 4, source);
    if (version != fused_format_version)
      throw FormatError(source + ": unsupported fused format version " + std::to_string(version));
    const auto columns = get_le(content, pos, 4, source);
    const auto rows = get_le(content, pos, 8, source);
    if (columns < 4)
      throw FormatError(source + ": too few columns");
    const std::size_t n_values = columns - 1;
    if (rows > content.size() / (4 * columns))
      throw FormatError(source + ": row count exceeds file size");
    data.values = Matrix(rows, n_values);
    for (std::uint64_t i = 0; i < rows; ++i) {
      for (std::size_t k = 0; k < n_values; ++k) {
        const auto bits = static_cast<std::uint32_t>(get_le(content, pos, 4, source));
        float f;
        std::memcpy(&f, &bits, 4);
        data.values(i, k) = f;
      }
      data.labels.push_back(static_cast<ClassId>(get_le(content, pos, 4, source)));
    }
    const auto meta_len = get_le(content, pos, 4, source);
    if (pos + meta_len != content.size())
      throw FormatError(source + ": metadata length mismatch");
    content = content.substr(pos);
  }

  std::istringstream lines(content);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty())
      continue;
    if (body.front() == '#') {
      parse_header_line(body.substr(1), data);
      continue;
    }
    const auto fields = text::split(body, ',');
    if (!header_seen) {
      header_seen = true;
      for (const auto f : fields)
        data.columns.emplace_back(f);
      if (data.columns.size() < 4 || data.columns.back() != "label")
        throw ParseError(source, line_no, "fused header must end with 'label'");
      continue;
    }
    if (format == FusedFormat::packed_binary)
      throw FormatError(source + ": unexpected data in metadata block");
    if (fields.size() != data.columns.size())
      throw ParseError(source, line_no, "wrong field count");
    std::vector<double> row;
    for (std::size_t k = 0; k + 1 < fields.size(); ++k) {
      const auto v = text::parse_double(fields[k]);
      if (!v)
        throw ParseError(source, line_no, "non-numeric field");
      row.push_back(*v);
    }
    const auto label = text::parse_int(fields.back());
    if (!label)
      throw ParseError(source, line_no, "bad label");
    data.values.push_row(row);
    data.labels.push_back(static_cast<ClassId>(*label));
  }
  if (!header_seen)
    throw ParseError(source, 0, "missing column header");
  if (data.values.rows() == 0)
    data.values = Matrix(0, data.columns.size() - 1);
  return data;
}

std::array<std::filesystem::path, 3>
export_experiment_suite(const LabeledPointCloud& cloud,
                        const FeatureTable& table,
                        const std::string& path_prefix,
                        FusedFormat format,
                        const std::string& source_id)
{
  const std::string ext = format == FusedFormat::csv ? ".csv" : ".bin";
  const FeatureSet sets[3] = { FeatureSet::xyz_only(), FeatureSet::nine_f(), FeatureSet::six_f() };
  std::array<std::filesystem::path, 3> paths;
  for (int i = 0; i < 3; ++i) {
    paths[i] = path_prefix + "_" + sets[i].name + ext;
    export_fused(cloud, table, sets[i], paths[i], format, source_id);
  }
  return paths;
}

} // namespace facade
