#include "facade/downsample.hpp"
#include "facade/error.hpp"
#include "facade/evaluation.hpp"
#include "facade/features.hpp"
#include "facade/fusion_export.hpp"
#include "facade/pipeline.hpp"
#include "facade/random_forest.hpp"
#include "facade/synthetic.hpp"
#include "facade/text.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <map>
#include <set>
#include <string>

using namespace facade;
namespace fs = std::filesystem;

namespace {

FusedFormat
parse_fused_format(const std::string& s)
{
  if (s == "csv")
    return FusedFormat::csv;
  if (s == "binary" || s == "packed_binary")
    return FusedFormat::packed_binary;
  throw Error("unknown export format '" + s + "' (csv, binary)");
}

// Rows with invalid features are dropped before training.
Matrix
training_rows(const SelectedMatrix& selected, const std::vector<ClassId>& labels, std::vector<ClassId>& kept)
{
  Matrix m;
  for (std::size_t i = 0; i < selected.rows.rows(); ++i) {
    if (!selected.valid[i])
      continue;
    m.push_row(selected.rows.row(i));
    kept.push_back(labels[i]);
  }
  return m;
}

void
print_importance(const std::vector<std::pair<std::string, double>>& scores)
{
  for (const auto& [name, score] : scores)
    std::printf("%-20s %.6f\n", name.c_str(), score);
}

} // namespace

int
main(int argc, char** argv)
{
  CLI::App app{ "Facade point cloud classification toolkit" };
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(toolkit_version));

  unsigned threads = 0;
  app.add_option("--threads", threads, "Worker thread cap (0 = all cores)")->capture_default_str();

  // downsample
  auto* ds = app.add_subcommand("downsample", "Keep points at least --min-dist apart");
  std::string ds_in, ds_out;
  double ds_min = 0.1;
  ds->add_option("--in", ds_in, "Input cloud (.ply or text)")->required()->check(CLI::ExistingFile);
  ds->add_option("--out", ds_out, "Output cloud")->required();
  ds->add_option("--min-dist", ds_min, "Minimum spacing in meters")->capture_default_str();

  // extract
  auto* ex = app.add_subcommand("extract", "Compute per-point covariance features");
  std::string ex_in, ex_out, ex_planarity = "standard";
  ExtractOptions ex_opts;
  ex->add_option("--in", ex_in, "Input cloud")->required()->check(CLI::ExistingFile);
  ex->add_option("--out", ex_out, "Feature table CSV")->required();
  ex->add_option("--radius", ex_opts.radius, "Neighborhood radius in meters")->capture_default_str();
  ex->add_option("--min-neighbors", ex_opts.min_neighbors, "Minimum neighbors for a valid row")
    ->capture_default_str();
  ex->add_option("--planarity", ex_planarity, "Planarity formula")
    ->check(CLI::IsMember({ "standard", "printed_literal" }))
    ->capture_default_str();

  // train-rf
  auto* tr = app.add_subcommand("train-rf", "Train a random forest on a feature table");
  std::string tr_in, tr_model, tr_importance, tr_set = "6F", tr_fps = "sqrt";
  ForestHyperparams hp;
  std::size_t tr_depth = 0;
  tr->add_option("--features", tr_in, "Labeled feature table CSV")->required()->check(CLI::ExistingFile);
  tr->add_option("--model", tr_model, "Output model file")->required();
  tr->add_option("--importance", tr_importance, "Optional importance CSV");
  tr->add_option("--set", tr_set, "Feature set: XYZ, 9F, 6F or comma list")->capture_default_str();
  tr->add_option("--trees", hp.n_trees, "Number of trees")->capture_default_str();
  tr->add_option("--max-depth", tr_depth, "Depth limit (0 = unlimited)")->capture_default_str();
  tr->add_option("--min-samples-leaf", hp.min_samples_leaf, "Minimum rows per leaf")->capture_default_str();
  tr->add_option("--features-per-split", tr_fps, "Candidate features per split (sqrt or integer)")
    ->capture_default_str();
  tr->add_option("--bootstrap-fraction", hp.bootstrap_fraction, "Bootstrap sample size / rows")
    ->capture_default_str();
  tr->add_option("--seed", hp.rng_seed, "Random seed")->capture_default_str();

  // predict-rf
  auto* pr = app.add_subcommand("predict-rf", "Predict labels for a feature table");
  std::string pr_model, pr_in, pr_out;
  pr->add_option("--model", pr_model, "Model file")->required()->check(CLI::ExistingFile);
  pr->add_option("--features", pr_in, "Feature table CSV")->required()->check(CLI::ExistingFile);
  pr->add_option("--out", pr_out, "Prediction file")->required();

  // importance
  auto* im = app.add_subcommand("importance", "Print feature importances of a model");
  std::string im_model, im_out;
  double im_threshold = -1.0;
  std::size_t im_top = 0;
  im->add_option("--model", im_model, "Model file")->required()->check(CLI::ExistingFile);
  im->add_option("--out", im_out, "CSV output (default: importance.csv next to the model)");
  auto* im_thr_opt = im->add_option("--threshold", im_threshold, "Also print features scoring above this");
  auto* im_top_opt = im->add_option("--top", im_top, "Also print the k best geometric features");
  im_thr_opt->excludes(im_top_opt);

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "Confusion matrix and accuracy");
  std::string ev_pred, ev_truth, ev_classes, ev_out;
  bool ev_include_invalid = false;
  ev->add_option("--pred", ev_pred, "Prediction file")->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", ev_truth, "Labeled cloud aligned with predictions")->required()->check(CLI::ExistingFile);
  ev->add_option("--classes", ev_classes, "Merge schema applied to the truth labels")->check(CLI::ExistingFile);
  ev->add_option("--out", ev_out, "Report directory")->required();
  ev->add_flag("--include-invalid", ev_include_invalid, "Count invalid-feature rows as errors");

  // export-fused
  auto* fx = app.add_subcommand("export-fused", "Write coordinates + features + label for network training");
  std::string fx_in, fx_out, fx_set = "6F", fx_format = "csv", fx_source;
  bool fx_suite = false;
  fx->add_option("--features", fx_in, "Labeled feature table CSV")->required()->check(CLI::ExistingFile);
  fx->add_option("--out", fx_out, "Output file, or path prefix with --suite")->required();
  fx->add_option("--set", fx_set, "Feature set")->capture_default_str();
  fx->add_option("--format", fx_format, "csv or binary")
    ->check(CLI::IsMember({ "csv", "binary", "packed_binary" }))
    ->capture_default_str();
  fx->add_option("--source", fx_source, "Source id recorded in the header (default: input file name)");
  fx->add_flag("--suite", fx_suite, "Write XYZ, XYZ+9F and XYZ+6F variants");

  // gen-synthetic
  auto* gs = app.add_subcommand("gen-synthetic", "Generate a labeled test scene");
  std::string gs_scene = "plane", gs_out;
  synthetic::SceneOptions gs_opts;
  gs->add_option("--scene", gs_scene, "plane, line, ball, plane_line or facade")->capture_default_str();
  gs->add_option("--n", gs_opts.n, "Number of points")->capture_default_str();
  gs->add_option("--spacing", gs_opts.spacing, "Lattice spacing (0 = scene default)")->capture_default_str();
  gs->add_option("--jitter", gs_opts.jitter, "Jitter as a fraction of spacing")->capture_default_str();
  gs->add_option("--seed", gs_opts.seed, "Random seed")->capture_default_str();
  gs->add_option("--out", gs_out, "Output cloud")->required();

  // run
  auto* rn = app.add_subcommand("run", "Run the full pipeline from a JSON config");
  std::string rn_config;
  rn->add_option("--config", rn_config, "Run configuration")->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ds) {
      const auto cloud = load_point_cloud(ds_in);
      const auto out = distance_downsample(cloud, DownsampleSpec{ ds_min });
      save_point_cloud(out, ds_out);
      std::cerr << "kept " << out.size() << " of " << cloud.size() << " points\n";
    } else if (*ex) {
      ex_opts.threads = threads;
      ex_opts.planarity =
        ex_planarity == "standard" ? PlanarityFormula::standard : PlanarityFormula::printed_literal;
      const auto cloud = load_point_cloud(ex_in);
      const auto table = extract_features(cloud, ex_opts);
      save_feature_table(cloud, table, ex_out);
      std::cerr << table.valid_count() << " of " << table.size() << " rows valid\n";
    } else if (*tr) {
      if (tr_depth > 0)
        hp.max_depth = tr_depth;
      if (tr_fps != "sqrt") {
        const auto v = text::parse_int(tr_fps);
        if (!v || *v <= 0)
          throw CLI::ValidationError("--features-per-split", "expected sqrt or a positive integer");
        hp.features_per_split = static_cast<std::size_t>(*v);
      }
      hp.threads = threads;
      const auto loaded = load_feature_table(tr_in);
      if (!loaded.cloud.has_labels())
        throw Error(tr_in + " carries no labels");
      const auto selected = select_columns(loaded.cloud, loaded.table, FeatureSet::parse(tr_set), true);
      std::vector<ClassId> labels;
      const Matrix x = training_rows(selected, *loaded.cloud.labels, labels);
      if (x.rows() == 0)
        throw Error("no valid rows to train on");
      const auto model = train_forest(x, labels, selected.column_names, hp);
      save_model(model, tr_model);
      if (!tr_importance.empty())
        save_importance_csv(feature_importance(model), tr_importance);
    } else if (*pr) {
      const auto model = load_model(pr_model);
      const auto loaded = load_feature_table(pr_in);
      // Model columns are x, y, z followed by the trained feature set.
      FeatureSet set;
      set.name = "model";
      for (std::size_t i = 3; i < model.feature_names.size(); ++i)
        set.columns.push_back(model.feature_names[i]);
      const auto selected = select_columns(loaded.cloud, loaded.table, set, true);
      auto labels = predict(model, selected.rows, selected.column_names);
      for (std::size_t i = 0; i < labels.size(); ++i)
        if (!selected.valid[i])
          labels[i] = model.majority_class();
      save_predictions(labels, selected.valid, pr_out);
    } else if (*im) {
      const auto model = load_model(im_model);
      const auto scores = feature_importance(model);
      print_importance(scores);
      const fs::path out = im_out.empty() ? fs::path(im_model).parent_path() / "importance.csv" : fs::path(im_out);
      save_importance_csv(scores, out);
      if (*im_thr_opt || *im_top_opt) {
        const SelectionRule rule = *im_top_opt ? SelectionRule{ TopK{ im_top } } : SelectionRule{ im_threshold };
        const auto chosen = select_top_features(scores, rule);
        std::printf("selected:");
        for (const auto& c : chosen.columns)
          std::printf(" %s", c.c_str());
        std::printf("\n");
      }
    } else if (*ev) {
      const auto preds = load_predictions(ev_pred);
      auto truth = load_point_cloud(ev_truth);
      if (!truth.has_labels())
        throw Error(ev_truth + " carries no labels");
      if (!ev_classes.empty())
        truth = apply_class_merge(truth, load_merge_schema(ev_classes));
      if (preds.labels.size() != truth.size())
        throw Error("prediction count " + std::to_string(preds.labels.size()) + " does not match truth count " +
                    std::to_string(truth.size()));
      const auto masked = apply_validity_mask(preds.labels, *truth.labels, preds.valid);
      std::set<ClassId> ids(truth.labels->begin(), truth.labels->end());
      ids.insert(preds.labels.begin(), preds.labels.end());
      const std::vector<ClassId> class_ids(ids.begin(), ids.end());
      EvaluationReport report;
      report.matrix = confusion(masked.predicted, masked.truth, class_ids);
      report.accuracy = masked_accuracy(masked, ev_include_invalid);
      report.class_names = truth.class_names;
      report.metadata = { { "excluded_invalid", std::to_string(masked.excluded) },
                          { "invalid_as_errors", ev_include_invalid ? "true" : "false" } };
      write_report(report, ev_out);
      std::cout << format_report_text(report);
    } else if (*fx) {
      const auto loaded = load_feature_table(fx_in);
      const auto format = parse_fused_format(fx_format);
      const std::string source = fx_source.empty() ? fs::path(fx_in).stem().string() : fx_source;
      if (fx_suite) {
        for (const auto& p : export_experiment_suite(loaded.cloud, loaded.table, fx_out, format, source))
          std::cerr << "wrote " << p.string() << "\n";
      } else {
        export_fused(loaded.cloud, loaded.table, FeatureSet::parse(fx_set), fx_out, format, source);
      }
    } else if (*gs) {
      const auto cloud = synthetic::generate(synthetic::parse_scene(gs_scene), gs_opts);
      save_point_cloud(cloud, gs_out);
      std::cerr << "wrote " << cloud.size() << " points\n";
    } else if (*rn) {
      auto config = load_run_config(rn_config);
      if (threads > 0) {
        config.threads = threads;
        config.forest.threads = threads;
      }
      const auto result = run_pipeline(config, &std::cerr);
      std::cerr << "accuracy " << text::fixed(result.accuracy, 4) << ", manifest at "
                << (config.output_dir / "manifest.json").string() << "\n";
    }
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
