#include "facade/evaluation.hpp"

#include "facade/error.hpp"
#include "facade/text.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace facade {

double
overall_accuracy(std::span<const ClassId> predicted, std::span<const ClassId> truth)
{
  if (predicted.size() != truth.size())
    throw Error("prediction count " + std::to_string(predicted.size()) + " != truth count " +
                std::to_string(truth.size()));
  if (truth.empty())
    throw Error("accuracy of an empty label set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i)
    correct += predicted[i] == truth[i];
  return static_cast<double>(correct) / static_cast<double>(truth.size());
}

std::uint64_t
ConfusionMatrix::trace() const
{
  std::uint64_t t = 0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    t += counts[i][i];
  return t;
}

double
ConfusionMatrix::accuracy() const
{
  return total == 0 ? 0.0 : static_cast<double>(trace()) / static_cast<double>(total);
}

std::uint64_t
ConfusionMatrix::row_sum(std::size_t i) const
{
  std::uint64_t s = 0;
  for (const auto c : counts[i])
    s += c;
  return s;
}

std::uint64_t
ConfusionMatrix::col_sum(std::size_t j) const
{
  std::uint64_t s = 0;
  for (const auto& row : counts)
    s += row[j];
  return s;
}

ConfusionMatrix
confusion(std::span<const ClassId> predicted,
          std::span<const ClassId> truth,
          std::span<const ClassId> class_ids)
{
  if (predicted.size() != truth.size())
    throw Error("prediction count " + std::to_string(predicted.size()) + " != truth count " +
                std::to_string(truth.size()));
  ConfusionMatrix m;
  m.class_ids.assign(class_ids.begin(), class_ids.end());
  std::map<ClassId, std::size_t> position;
  for (std::size_t i = 0; i < m.class_ids.size(); ++i)
    if (!position.emplace(m.class_ids[i], i).second)
      throw Error("duplicate class id " + std::to_string(m.class_ids[i]));
  const auto index_of = [&](ClassId id) {
    const auto it = position.find(id);
    if (it == position.end())
      throw Error("label " + std::to_string(id) + " is not in the class list");
    return it->second;
  };
  m.counts.assign(m.class_ids.size(), std::vector<std::uint64_t>(m.class_ids.size(), 0));
  for (std::size_t i = 0; i < truth.size(); ++i)
    ++m.counts[index_of(truth[i])][index_of(predicted[i])];
  m.total = truth.size();
  return m;
}

std::vector<ClassMetrics>
per_class_metrics(const ConfusionMatrix& matrix)
{
  std::vector<ClassMetrics> out;
  for (std::size_t i = 0; i < matrix.class_ids.size(); ++i) {
    ClassMetrics c;
    c.id = matrix.class_ids[i];
    const double tp = static_cast<double>(matrix.counts[i][i]);
    const auto col = matrix.col_sum(i);
    const auto row = matrix.row_sum(i);
    if (col > 0) {
      c.precision = tp / static_cast<double>(col);
      c.precision_defined = true;
    }
    if (row > 0) {
      c.recall = tp / static_cast<double>(row);
      c.recall_defined = true;
    }
    if (c.precision_defined && c.recall_defined && c.precision + c.recall > 0.0) {
      c.f1 = 2.0 * c.precision * c.recall / (c.precision + c.recall);
      c.f1_defined = true;
    } else if (c.precision_defined && c.recall_defined) {
      c.f1_defined = true; // both zero
    }
    out.push_back(c);
  }
  return out;
}

MaskedLabels
apply_validity_mask(std::span<const ClassId> predicted,
                    std::span<const ClassId> truth,
                    std::span<const std::uint8_t> valid)
{
  if (predicted.size() != truth.size() || valid.size() != truth.size())
    throw Error("prediction, truth and validity mask lengths differ");
  MaskedLabels out;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (valid[i]) {
      out.predicted.push_back(predicted[i]);
      out.truth.push_back(truth[i]);
    } else {
      ++out.excluded;
    }
  }
  return out;
}

double
masked_accuracy(const MaskedLabels& masked, bool invalid_as_errors)
{
  if (!invalid_as_errors)
    return overall_accuracy(masked.predicted, masked.truth);
  const std::size_t n = masked.truth.size() + masked.excluded;
  if (n == 0)
    throw Error("accuracy of an empty label set is undefined");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < masked.truth.size(); ++i)
    correct += masked.predicted[i] == masked.truth[i];
  return static_cast<double>(correct) / static_cast<double>(n);
}

namespace {

std::string
name_of(const EvaluationReport& report, ClassId id)
{
  const auto it = report.class_names.find(id);
  return it == report.class_names.end() ? std::to_string(id) : it->second;
}

// CSV cells are class names; keep them free of separators.
std::string
csv_safe(std::string s)
{
  std::replace(s.begin(), s.end(), ',', ' ');
  return s;
}

std::string
percent(double v)
{
  return text::fixed(100.0 * v, 2) + "%";
}

} // namespace

std::string
format_report_text(const EvaluationReport& report)
{
  const auto& m = report.matrix;
  std::ostringstream os;
  for (const auto& [k, v] : report.metadata)
    os << k << ": " << v << '\n';
  os << "overall accuracy: " << percent(report.accuracy) << " (" << m.trace() << " / " << m.total
     << ")\n\n";

  std::size_t width = 8;
  for (const auto id : m.class_ids)
    width = std::max(width, name_of(report, id).size() + 2);
  const auto pad = [&](const std::string& s) {
    return std::string(width > s.size() ? width - s.size() : 1, ' ') + s;
  };

  os << "confusion (rows = truth, columns = prediction)\n" << pad("");
  for (const auto id : m.class_ids)
    os << pad(name_of(report, id));
  os << '\n';
  for (std::size_t i = 0; i < m.class_ids.size(); ++i) {
    os << pad(name_of(report, m.class_ids[i]));
    for (const auto c : m.counts[i])
      os << pad(std::to_string(c));
    os << '\n';
  }

  os << '\n' << pad("class") << pad("precision") << pad("recall") << pad("f1") << '\n';
  for (const auto& c : per_class_metrics(m)) {
    const auto cell = [&](bool defined, double v) { return pad(defined ? text::fixed(v, 4) : "n/a"); };
    os << pad(name_of(report, c.id)) << cell(c.precision_defined, c.precision)
       << cell(c.recall_defined, c.recall) << cell(c.f1_defined, c.f1) << '\n';
  }
  return os.str();
}

void
write_report(const EvaluationReport& report, const std::filesystem::path& dir)
{
  const auto& m = report.matrix;
  if (m.class_ids.empty() || m.total == 0)
    throw Error("cannot report an empty confusion matrix");
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec)
    throw Error("cannot create " + dir.string() + ": " + ec.message());

  std::ofstream csv(dir / "confusion.csv", std::ios::binary | std::ios::trunc);
  if (!csv)
    throw Error("cannot write " + (dir / "confusion.csv").string());
  csv << "# facade-eval v1\n";
  for (const auto& [k, v] : report.metadata)
    csv << "# " << k << '=' << v << '\n';
  csv << "# accuracy=" << text::shortest(report.accuracy) << '\n';
  csv << "# total=" << m.total << '\n';
  csv << "# class_ids=";
  for (std::size_t i = 0; i < m.class_ids.size(); ++i)
    csv << (i ? ";" : "") << m.class_ids[i];
  csv << '\n';
  csv << "truth\\predicted";
  for (const auto id : m.class_ids)
    csv << ',' << csv_safe(name_of(report, id));
  csv << '\n';
  for (std::size_t i = 0; i < m.class_ids.size(); ++i) {
    csv << csv_safe(name_of(report, m.class_ids[i]));
    for (const auto c : m.counts[i])
      csv << ',' << c;
    csv << '\n';
  }
  csv.flush();
  if (!csv)
    throw Error("write failed for confusion.csv");

  std::ofstream txt(dir / "report.txt", std::ios::binary | std::ios::trunc);
  if (!txt)
    throw Error("cannot write " + (dir / "report.txt").string());
  txt << format_report_text(report);
  txt.flush();
  if (!txt)
    throw Error("write failed for report.txt");
}

EvaluationReport
read_confusion_csv(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path.string());
  const std::string source = path.string();
  EvaluationReport report;
  auto& m = report.matrix;
  std::vector<std::string> names;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty())
      continue;
    if (body.front() == '#') {
      const auto kv = text::trim(body.substr(1));
      const auto eq = kv.find('=');
      if (eq == std::string_view::npos)
        continue;
      const std::string key(kv.substr(0, eq));
      const std::string value(kv.substr(eq + 1));
      if (key == "accuracy") {
        report.accuracy = text::parse_double(value).value_or(0.0);
      } else if (key == "total") {
        m.total = static_cast<std::uint64_t>(text::parse_int(value).value_or(0));
      } else if (key == "class_ids") {
        for (const auto part : text::split(value, ';')) {
          const auto id = text::parse_int(part);
          if (!id)
            throw ParseError(source, line_no, "bad class id '" + std::string(part) + "'");
          m.class_ids.push_back(static_cast<ClassId>(*id));
        }
      } else {
        report.metadata.emplace_back(key, value);
      }
      continue;
    }
    const auto fields = text::split(body, ',');
    if (!header_seen) {
      header_seen = true;
      for (std::size_t k = 1; k < fields.size(); ++k)
        names.emplace_back(fields[k]);
      if (names.size() != m.class_ids.size())
        throw ParseError(source, line_no, "header does not match class_ids");
      continue;
    }
    if (fields.size() != names.size() + 1)
      throw ParseError(source, line_no, "wrong field count");
    std::vector<std::uint64_t> row;
    for (std::size_t k = 1; k < fields.size(); ++k) {
      const auto v = text::parse_int(fields[k]);
      if (!v || *v < 0)
        throw ParseError(source, line_no, "bad count '" + std::string(fields[k]) + "'");
      row.push_back(static_cast<std::uint64_t>(*v));
    }
    m.counts.push_back(std::move(row));
  }
  if (m.counts.size() != m.class_ids.size())
    throw ParseError(source, 0, "row count does not match class_ids");
  for (std::size_t i = 0; i < names.size(); ++i)
    report.class_names[m.class_ids[i]] = names[i];
  return report;
}

void
save_predictions(std::span<const ClassId> labels,
                 std::span<const std::uint8_t> valid,
                 const std::filesystem::path& path)
{
  if (labels.size() != valid.size())
    throw Error("prediction and validity lengths differ");
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string());
  out << "# facade-pred v1\nlabel,valid\n";
  for (std::size_t i = 0; i < labels.size(); ++i)
    out << labels[i] << ',' << (valid[i] ? 1 : 0) << '\n';
  out.flush();
  if (!out)
    throw Error("write failed for " + path.string());
}

Predictions
load_predictions(const std::filesystem::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open " + path.string());
  const std::string source = path.string();
  Predictions p;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto body = text::trim(line);
    if (body.empty() || body.front() == '#')
      continue;
    if (!header_seen) {
      if (body != "label,valid")
        throw ParseError(source, line_no, "expected header 'label,valid'");
      header_seen = true;
      continue;
    }
    const auto fields = text::split(body, ',');
    if (fields.size() != 2)
      throw ParseError(source, line_no, "expected 2 fields");
    const auto label = text::parse_int(text::trim(fields[0]));
    const auto valid = text::parse_int(text::trim(fields[1]));
    if (!label || *label < 0 || !valid || (*valid != 0 && *valid != 1))
      throw ParseError(source, line_no, "malformed prediction row");
    p.labels.push_back(static_cast<ClassId>(*label));
    p.valid.push_back(static_cast<std::uint8_t>(*valid));
  }
  return p;
}

} // namespace facade
