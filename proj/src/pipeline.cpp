#include "facade/pipeline.hpp"

#include "facade/downsample.hpp"
#include "facade/error.hpp"
#include "facade/evaluation.hpp"
#include "facade/text.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <chrono>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <set>
#include <sstream>

namespace facade {

namespace fs = std::filesystem;
using nlohmann::json;

void
RunConfig::validate() const
{
  if (train_inputs.empty())
    throw Error("config: at least one training input is required");
  for (const auto& p : train_inputs)
    if (!fs::is_regular_file(p))
      throw Error("config: training input " + p.string() + " does not exist");
  if (test_input && !fs::is_regular_file(*test_input))
    throw Error("config: test input " + test_input->string() + " does not exist");
  if (merge_schema && !fs::is_regular_file(*merge_schema))
    throw Error("config: merge schema " + merge_schema->string() + " does not exist");
  if (!std::isfinite(downsample_min_distance) || !(downsample_min_distance > 0.0))
    throw Error("config: downsample_min_distance must be > 0");
  if (!std::isfinite(radius) || !(radius > 0.0))
    throw Error("config: radius must be > 0");
  if (min_neighbors < 3)
    throw Error("config: min_neighbors must be >= 3");
  if (output_dir.empty())
    throw Error("config: output_dir is required");
  forest.validate();
}

RunConfig
load_run_config(const fs::path& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  if (!doc.is_object())
    throw ParseError(path.string(), 0, "config must be a JSON object");

  static const std::set<std::string> known = {
    "train",        "test",          "merge_schema",      "downsample_min_distance",
    "radius",       "min_neighbors", "feature_set",       "forest",
    "seed",         "output_dir",    "export_format",     "export_suite",
    "invalid_as_errors", "planarity_formula", "threads",
  };
  for (const auto& [key, value] : doc.items())
    if (!known.contains(key))
      throw ParseError(path.string(), 0, "unknown config key '" + key + "'");

  const fs::path base = path.parent_path();
  const auto resolve = [&](const std::string& p) {
    const fs::path rel(p);
    return rel.is_absolute() ? rel : base / rel;
  };

  RunConfig config;
  try {
    if (!doc.contains("train"))
      throw Error("config: 'train' is required");
    if (doc["train"].is_string())
      config.train_inputs.push_back(resolve(doc["train"].get<std::string>()));
    else
      for (const auto& p : doc["train"])
        config.train_inputs.push_back(resolve(p.get<std::string>()));
    if (doc.contains("test") && !doc["test"].is_null())
      config.test_input = resolve(doc["test"].get<std::string>());
    if (doc.contains("merge_schema") && !doc["merge_schema"].is_null())
      config.merge_schema = resolve(doc["merge_schema"].get<std::string>());
    config.downsample_min_distance = doc.value("downsample_min_distance", config.downsample_min_distance);
    config.radius = doc.value("radius", config.radius);
    config.min_neighbors = doc.value("min_neighbors", config.min_neighbors);
    if (doc.contains("feature_set")) {
      const auto& fset = doc["feature_set"];
      if (fset.is_string()) {
        config.feature_set = FeatureSet::parse(fset.get<std::string>());
      } else {
        std::string joined;
        for (const auto& c : fset)
          joined += (joined.empty() ? "" : ",") + c.get<std::string>();
        config.feature_set = FeatureSet::parse(joined);
      }
    }
    if (!doc.contains("seed") || !doc["seed"].is_number_integer())
      throw Error("config: integer 'seed' is required");
    config.forest.rng_seed = doc["seed"].get<std::uint64_t>();
    if (doc.contains("forest")) {
      const auto& f = doc["forest"];
      static const std::set<std::string> forest_keys = {
        "n_trees", "max_depth", "min_samples_leaf", "features_per_split", "bootstrap_fraction",
      };
      for (const auto& [key, value] : f.items())
        if (!forest_keys.contains(key))
          throw Error("config: unknown forest key '" + key + "'");
      config.forest.n_trees = f.value("n_trees", config.forest.n_trees);
      if (f.contains("max_depth") && !f["max_depth"].is_null())
        config.forest.max_depth = f["max_depth"].get<std::size_t>();
      config.forest.min_samples_leaf = f.value("min_samples_leaf", config.forest.min_samples_leaf);
      if (f.contains("features_per_split")) {
        const auto& v = f["features_per_split"];
        if (v.is_number_integer())
          config.forest.features_per_split = v.get<std::size_t>();
        else if (!v.is_string() || v.get<std::string>() != "sqrt")
          throw Error("config: features_per_split must be an integer or \"sqrt\"");
      }
      config.forest.bootstrap_fraction = f.value("bootstrap_fraction", config.forest.bootstrap_fraction);
    }
    if (!doc.contains("output_dir"))
      throw Error("config: 'output_dir' is required");
    config.output_dir = resolve(doc["output_dir"].get<std::string>());
    const auto format = doc.value("export_format", std::string("csv"));
    if (format == "csv")
      config.export_format = FusedFormat::csv;
    else if (format == "packed_binary" || format == "binary")
      config.export_format = FusedFormat::packed_binary;
    else
      throw Error("config: export_format must be csv or packed_binary");
    config.export_suite = doc.value("export_suite", false);
    config.invalid_as_errors = doc.value("invalid_as_errors", false);
    const auto planarity = doc.value("planarity_formula", std::string("standard"));
    if (planarity == "standard")
      config.planarity = PlanarityFormula::standard;
    else if (planarity == "printed_literal")
      config.planarity = PlanarityFormula::printed_literal;
    else
      throw Error("config: planarity_formula must be standard or printed_literal");
    config.threads = doc.value("threads", 0u);
  } catch (const json::exception& e) {
    throw ParseError(path.string(), 0, e.what());
  }
  config.forest.threads = config.threads;
  return config;
}

std::string
sha256_file(const fs::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256 init failed");
  }
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0)
      EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i)
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(digest[i]);
  return hex.str();
}

namespace {

fs::path
partial(const fs::path& p)
{
  return fs::path(p.string() + ".partial");
}

// Moves a finished stage output into place.
void
commit(const fs::path& p)
{
  std::error_code ec;
  if (fs::is_directory(p))
    fs::remove_all(p, ec);
  fs::rename(partial(p), p, ec);
  if (ec)
    throw Error("cannot rename " + partial(p).string() + ": " + ec.message());
}

class Stages
{
public:
  Stages(const fs::path& out, std::ostream* log)
    : out_(out)
    , log_(log)
  {}

  template<class Fn>
  auto run(const std::string& name, Fn&& fn)
  {
    const auto start = std::chrono::steady_clock::now();
    if (log_)
      *log_ << "[" << name << "] start\n";
    try {
      if constexpr (std::is_void_v<decltype(fn())>) {
        fn();
        finish(name, start);
      } else {
        auto result = fn();
        finish(name, start);
        return result;
      }
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      throw StageError(name, e.what());
    }
  }

  void add(const std::string& artifact, const std::vector<fs::path>& files)
  {
    ManifestEntry entry{ artifact, {} };
    for (const auto& f : files)
      entry.files.emplace_back(fs::relative(f, out_).generic_string(), sha256_file(f));
    manifest.push_back(std::move(entry));
  }

  std::vector<ManifestEntry> manifest;

private:
  void finish(const std::string& name, std::chrono::steady_clock::time_point start)
  {
    if (!log_)
      return;
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
    *log_ << "[" << name << "] done in " << text::fixed(dt.count(), 3) << " s\n";
  }

  fs::path out_;
  std::ostream* log_;
};

LabeledPointCloud
load_inputs(const std::vector<fs::path>& paths, const std::optional<ClassMergeSchema>& schema)
{
  std::vector<LabeledPointCloud> clouds;
  for (const auto& p : paths)
    clouds.push_back(load_point_cloud(p));
  auto cloud = concatenate(clouds);
  if (!cloud.has_labels())
    throw Error("inputs must carry class labels");
  if (schema)
    cloud = apply_class_merge(cloud, *schema);
  cloud.validate();
  return cloud;
}

Matrix
valid_rows(const SelectedMatrix& selected, std::span<const ClassId> labels, std::vector<ClassId>& kept_labels)
{
  Matrix m;
  for (std::size_t i = 0; i < selected.rows.rows(); ++i) {
    if (!selected.valid[i])
      continue;
    m.push_row(selected.rows.row(i));
    kept_labels.push_back(labels[i]);
  }
  return m;
}

} // namespace

PipelineResult
run_pipeline(const RunConfig& config, std::ostream* log)
{
  config.validate();
  const fs::path out = config.output_dir;
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec)
    throw StageError("setup", "cannot create " + out.string() + ": " + ec.message());

  Stages stages(out, log);
  const bool has_test = config.test_input.has_value();

  struct Clouds
  {
    LabeledPointCloud train, test;
  };
  auto clouds = stages.run("load", [&] {
    std::optional<ClassMergeSchema> schema;
    if (config.merge_schema)
      schema = load_merge_schema(*config.merge_schema);
    Clouds c;
    c.train = load_inputs(config.train_inputs, schema);
    if (has_test)
      c.test = load_inputs({ *config.test_input }, schema);
    return c;
  });

  stages.run("downsample", [&] {
    const DownsampleSpec spec{ config.downsample_min_distance };
    std::vector<fs::path> files{ out / "downsampled_train.txt" };
    clouds.train = distance_downsample(clouds.train, spec);
    save_point_cloud(clouds.train, partial(files[0]), CloudFormat::xyz_label_text);
    if (has_test) {
      files.push_back(out / "downsampled_test.txt");
      clouds.test = distance_downsample(clouds.test, spec);
      save_point_cloud(clouds.test, partial(files[1]), CloudFormat::xyz_label_text);
    }
    for (const auto& f : files)
      commit(f);
    stages.add("downsampled_cloud", files);
  });

  const ExtractOptions extract{ config.radius, config.min_neighbors, config.planarity, config.threads };
  struct Tables
  {
    FeatureTable train, test;
  };
  auto tables = stages.run("extract", [&] {
    Tables t;
    const auto start = std::chrono::steady_clock::now();
    t.train = extract_features(clouds.train, extract);
    std::vector<fs::path> files{ out / "features_train.csv" };
    save_feature_table(clouds.train, t.train, partial(files[0]));
    std::size_t points = clouds.train.size();
    if (has_test) {
      t.test = extract_features(clouds.test, extract);
      files.push_back(out / "features_test.csv");
      save_feature_table(clouds.test, t.test, partial(files[1]));
      points += clouds.test.size();
    }
    if (log) {
      const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - start;
      *log << "[extract] " << points << " points, "
           << text::fixed(static_cast<double>(points) / std::max(dt.count(), 1e-9), 0) << " points/s\n";
    }
    for (const auto& f : files)
      commit(f);
    stages.add("feature_table", files);
    return t;
  });

  auto model = stages.run("train", [&] {
    const auto selected = select_columns(clouds.train, tables.train, config.feature_set, true);
    std::vector<ClassId> labels;
    const Matrix x = valid_rows(selected, *clouds.train.labels, labels);
    if (x.rows() == 0)
      throw Error("no training point has a valid neighborhood; lower min_neighbors or raise radius");
    auto m = train_forest(x, labels, selected.column_names, config.forest);
    const fs::path model_path = out / "model.rfm";
    const fs::path importance_path = out / "importance.csv";
    save_model(m, partial(model_path));
    save_importance_csv(feature_importance(m), partial(importance_path));
    commit(model_path);
    commit(importance_path);
    stages.add("model", { model_path, importance_path });
    return m;
  });

  const LabeledPointCloud& eval_cloud = has_test ? clouds.test : clouds.train;
  const FeatureTable& eval_table = has_test ? tables.test : tables.train;

  auto predicted = stages.run("predict", [&] {
    const auto selected = select_columns(eval_cloud, eval_table, config.feature_set, true);
    auto labels = predict(model, selected.rows, selected.column_names);
    const ClassId fallback = model.majority_class();
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (!selected.valid[i])
        labels[i] = fallback;
    const fs::path path = out / "predictions.csv";
    save_predictions(labels, eval_table.valid, partial(path));
    commit(path);
    stages.add("predictions", { path });
    return labels;
  });

  PipelineResult result;
  stages.run("evaluate", [&] {
    const auto masked = apply_validity_mask(predicted, *eval_cloud.labels, eval_table.valid);
    std::set<ClassId> ids(model.class_ids.begin(), model.class_ids.end());
    ids.insert(eval_cloud.labels->begin(), eval_cloud.labels->end());
    const std::vector<ClassId> class_ids(ids.begin(), ids.end());

    EvaluationReport report;
    report.matrix = confusion(masked.predicted, masked.truth, class_ids);
    report.accuracy = masked_accuracy(masked, config.invalid_as_errors);
    report.class_names = eval_cloud.class_names;
    for (const auto& [id, name] : clouds.train.class_names)
      report.class_names.try_emplace(id, name);
    report.metadata = {
      { "evaluated_on", has_test ? "test" : "train" },
      { "radius", text::shortest(config.radius) },
      { "min_neighbors", std::to_string(config.min_neighbors) },
      { "feature_set", config.feature_set.name },
      { "seed", std::to_string(config.forest.rng_seed) },
      { "n_trees", std::to_string(config.forest.n_trees) },
      { "excluded_invalid", std::to_string(masked.excluded) },
      { "invalid_as_errors", config.invalid_as_errors ? "true" : "false" },
    };
    const fs::path dir = out / "evaluation";
    write_report(report, partial(dir));
    commit(dir);
    stages.add("evaluation", { dir / "confusion.csv", dir / "report.txt" });
    if (log)
      *log << "[evaluate] accuracy " << text::fixed(report.accuracy, 4) << " on " << report.matrix.total
           << " points\n";
    result.accuracy = report.accuracy;
    result.excluded = masked.excluded;
  });

  stages.run("export", [&] {
    const std::string ext = config.export_format == FusedFormat::csv ? ".csv" : ".bin";
    std::vector<fs::path> files;
    const auto export_one = [&](const LabeledPointCloud& cloud, const FeatureTable& table, const std::string& tag) {
      const fs::path path = out / ("fused_" + tag + "_" + config.feature_set.name + ext);
      export_fused(cloud, table, config.feature_set, partial(path), config.export_format, tag);
      commit(path);
      files.push_back(path);
      if (config.export_suite) {
        const auto prefix = (out / ("suite_" + tag)).string();
        const auto written = export_experiment_suite(cloud, table, prefix + ".partial", config.export_format, tag);
        const FeatureSet sets[3] = { FeatureSet::xyz_only(), FeatureSet::nine_f(), FeatureSet::six_f() };
        for (int i = 0; i < 3; ++i) {
          const fs::path final_path = prefix + "_" + sets[i].name + ext;
          fs::rename(written[i], final_path);
          files.push_back(final_path);
        }
      }
    };
    export_one(clouds.train, tables.train, "train");
    if (has_test)
      export_one(clouds.test, tables.test, "test");
    stages.add("fused_export", files);
  });

  json manifest;
  manifest["toolkit"] = std::string(toolkit_version);
  manifest["artifacts"] = json::array();
  for (const auto& entry : stages.manifest) {
    json files = json::array();
    for (const auto& [p, hash] : entry.files)
      files.push_back({ { "path", p }, { "sha256", hash } });
    manifest["artifacts"].push_back({ { "name", entry.artifact }, { "files", files } });
  }
  {
    const fs::path path = out / "manifest.json";
    std::ofstream mf(partial(path), std::ios::binary | std::ios::trunc);
    mf << manifest.dump(2) << '\n';
    mf.close();
    if (!mf)
      throw StageError("manifest", "cannot write manifest");
    commit(path);
  }
  result.manifest = std::move(stages.manifest);
  return result;
}

} // namespace facade
