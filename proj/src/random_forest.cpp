#include "facade/random_forest.hpp"

#include "facade/error.hpp"
#include "facade/parallel.hpp"
#include "facade/text.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <random>

namespace facade {

void
ForestHyperparams::validate() const
{
  if (n_trees < 1)
    throw Error("n_trees must be >= 1");
  if (min_samples_leaf < 1)
    throw Error("min_samples_leaf must be >= 1");
  if (features_per_split && *features_per_split < 1)
    throw Error("features_per_split must be >= 1");
  if (max_depth && *max_depth < 1)
    throw Error("max_depth must be >= 1");
  if (!(bootstrap_fraction > 0.0) || bootstrap_fraction > 1.0)
    throw Error("bootstrap_fraction must be in (0, 1]");
}

std::size_t
ForestHyperparams::resolved_features_per_split(std::size_t n_features) const
{
  const std::size_t k = features_per_split
                          ? *features_per_split
                          : static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
  return std::clamp<std::size_t>(k, 1, std::max<std::size_t>(n_features, 1));
}

std::span<const double>
DecisionTree::leaf_for(std::span<const double> x, std::size_t n_classes) const
{
  std::size_t id = 0;
  while (nodes[id].feature >= 0) {
    const auto& node = nodes[id];
    id = static_cast<std::size_t>(x[node.feature] <= node.threshold ? node.left : node.right);
  }
  return { leaf_probabilities.data() + static_cast<std::size_t>(nodes[id].leaf) * n_classes,
           n_classes };
}

ClassId
ForestModel::majority_class() const
{
  if (class_ids.empty())
    throw Error("model has no classes");
  std::size_t best = 0;
  for (std::size_t c = 1; c < class_counts.size(); ++c)
    if (class_counts[c] > class_counts[best])
      best = c;
  return class_ids[best];
}

namespace {

std::uint64_t
bounded(std::mt19937_64& rng, std::uint64_t n)
{
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r;
  do
    r = rng();
  while (r >= limit);
  return r % n;
}

struct TreeBuilder
{
  const Matrix& x;
  const std::vector<std::int32_t>& y; // class index per row
  std::size_t n_classes;
  const ForestHyperparams& params;
  std::size_t mtry;
  std::mt19937_64 rng;

  DecisionTree tree;
  std::vector<double> importance;

  struct Split
  {
    bool found = false;
    std::size_t feature = 0;
    double threshold = 0.0;
    double score = 0.0; // sum_l^2/n_l + sum_r^2/n_r, larger is purer
  };

  std::vector<std::pair<double, std::int32_t>> column;
  std::vector<std::uint64_t> left_counts;
  std::vector<std::uint64_t> right_counts;

  static std::uint64_t sum_squares(const std::vector<std::uint64_t>& counts)
  {
    std::uint64_t s = 0;
    for (const auto c : counts)
      s += c * c;
    return s;
  }

  Split best_split(std::span<const std::uint32_t> samples, const std::vector<std::uint64_t>& counts)
  {
    Split best;
    const std::size_t n_features = x.cols();
    std::vector<std::size_t> order(n_features);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n_features; i > 1; --i)
      std::swap(order[i - 1], order[bounded(rng, i)]);

    const std::size_t m = samples.size();
    const std::size_t msl = params.min_samples_leaf;
    std::size_t evaluated = 0;
    for (const std::size_t f : order) {
      if (evaluated == mtry)
        break;
      column.clear();
      for (const auto s : samples)
        column.emplace_back(x(s, f), y[s]);
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first)
        continue;
      ++evaluated;

      std::fill(left_counts.begin(), left_counts.end(), 0);
      right_counts = counts;
      std::uint64_t sq_left = 0;
      std::uint64_t sq_right = sum_squares(counts);
      for (std::size_t i = 0; i + 1 < m; ++i) {
        const auto c = static_cast<std::size_t>(column[i].second);
        sq_left += 2 * left_counts[c] + 1;
        sq_right -= 2 * right_counts[c] - 1;
        ++left_counts[c];
        --right_counts[c];
        if (column[i].first == column[i + 1].first)
          continue;
        const std::size_t nl = i + 1;
        const std::size_t nr = m - nl;
        if (nl < msl || nr < msl)
          continue;
        const double score = static_cast<double>(sq_left) / static_cast<double>(nl) +
                             static_cast<double>(sq_right) / static_cast<double>(nr);
        const double lo = column[i].first;
        const double hi = column[i + 1].first;
        double threshold = lo / 2 + hi / 2;
        if (!(threshold >= lo && threshold < hi))
          threshold = lo;
        const bool better = !best.found || score > best.score ||
                            (score == best.score && (f < best.feature ||
                                                     (f == best.feature && threshold < best.threshold)));
        if (better)
          best = { true, f, threshold, score };
      }
    }
    return best;
  }

  std::int32_t make_leaf(const std::vector<std::uint64_t>& counts, std::size_t m)
  {
    const auto leaf = static_cast<std::int32_t>(tree.leaf_probabilities.size() / n_classes);
    for (const auto c : counts)
      tree.leaf_probabilities.push_back(static_cast<double>(c) / static_cast<double>(m));
    return leaf;
  }

  void grow(std::vector<std::uint32_t>& samples)
  {
    struct Work
    {
      std::int32_t node;
      std::size_t begin, end, depth;
    };
    left_counts.assign(n_classes, 0);
    importance.assign(x.cols(), 0.0);
    tree.nodes.emplace_back();
    std::vector<Work> stack{ { 0, 0, samples.size(), 0 } };
    std::vector<std::uint64_t> counts(n_classes);

    while (!stack.empty()) {
      const Work w = stack.back();
      stack.pop_back();
      const std::size_t m = w.end - w.begin;
      const std::span<std::uint32_t> node_samples(samples.data() + w.begin, m);
      std::fill(counts.begin(), counts.end(), 0);
      for (const auto s : node_samples)
        ++counts[static_cast<std::size_t>(y[s])];

      const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;
      const bool depth_capped = params.max_depth && w.depth >= *params.max_depth;
      Split split;
      if (!pure && !depth_capped && m >= 2 * params.min_samples_leaf)
        split = best_split(node_samples, counts);
      if (!split.found) {
        tree.nodes[w.node].leaf = make_leaf(counts, m);
        continue;
      }

      const auto mid_it = std::stable_partition(
        node_samples.begin(), node_samples.end(), [&](std::uint32_t s) {
          return x(s, split.feature) <= split.threshold;
        });
      const std::size_t mid = w.begin + static_cast<std::size_t>(mid_it - node_samples.begin());

      // Weighted impurity decrease in sample-count units: m*G(parent) - nl*G(l) - nr*G(r).
      const double parent = static_cast<double>(m) -
                            static_cast<double>(sum_squares(counts)) / static_cast<double>(m);
      const double children = static_cast<double>(m) - split.score;
      importance[split.feature] += std::max(0.0, parent - children);

      const auto left = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      const auto right = static_cast<std::int32_t>(tree.nodes.size());
      tree.nodes.emplace_back();
      auto& node = tree.nodes[w.node];
      node.feature = static_cast<std::int32_t>(split.feature);
      node.threshold = split.threshold;
      node.left = left;
      node.right = right;
      stack.push_back({ right, mid, w.end, w.depth + 1 });
      stack.push_back({ left, w.begin, mid, w.depth + 1 });
    }
  }
};

} // namespace

ForestModel
train_forest(const Matrix& features,
             std::span<const ClassId> labels,
             std::vector<std::string> feature_names,
             const ForestHyperparams& params)
{
  params.validate();
  const std::size_t n = features.rows();
  if (n == 0)
    throw Error("cannot train on zero rows");
  if (labels.size() != n)
    throw Error("feature rows (" + std::to_string(n) + ") != labels (" +
                std::to_string(labels.size()) + ")");
  if (feature_names.size() != features.cols())
    throw Error("feature name count does not match column count");
  if (features.cols() == 0)
    throw Error("cannot train without feature columns");
  for (std::size_t i = 0; i < n; ++i)
    for (const double v : features.row(i))
      if (std::isnan(v))
        throw Error("NaN feature value in row " + std::to_string(i));

  ForestModel model;
  model.params = params;
  model.feature_names = std::move(feature_names);
  model.class_ids.assign(labels.begin(), labels.end());
  std::sort(model.class_ids.begin(), model.class_ids.end());
  model.class_ids.erase(std::unique(model.class_ids.begin(), model.class_ids.end()),
                        model.class_ids.end());
  const std::size_t k = model.class_ids.size();
  std::vector<std::int32_t> y(n);
  model.class_counts.assign(k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = std::lower_bound(model.class_ids.begin(), model.class_ids.end(), labels[i]);
    y[i] = static_cast<std::int32_t>(it - model.class_ids.begin());
    ++model.class_counts[static_cast<std::size_t>(y[i])];
  }

  const std::size_t mtry = params.resolved_features_per_split(features.cols());
  const auto draws = std::max<std::size_t>(
    1, static_cast<std::size_t>(std::llround(params.bootstrap_fraction * static_cast<double>(n))));
  model.trees.resize(params.n_trees);
  std::vector<std::vector<double>> tree_importance(params.n_trees);

  parallel_for(params.n_trees, params.threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t t = begin; t < end; ++t) {
      TreeBuilder builder{ features, y, k, params, mtry, std::mt19937_64(params.rng_seed + t), {}, {}, {}, {}, {} };
      std::vector<std::uint32_t> samples(draws);
      for (auto& s : samples)
        s = static_cast<std::uint32_t>(bounded(builder.rng, n));
      builder.grow(samples);
      model.trees[t] = std::move(builder.tree);
      tree_importance[t] = std::move(builder.importance);
    }
  });

  model.importances.assign(features.cols(), 0.0);
  for (const auto& imp : tree_importance) {
    const double total = std::accumulate(imp.begin(), imp.end(), 0.0);
    if (total <= 0.0)
      continue;
    for (std::size_t f = 0; f < imp.size(); ++f)
      model.importances[f] += imp[f] / total;
  }
  const double total = std::accumulate(model.importances.begin(), model.importances.end(), 0.0);
  if (total > 0.0)
    for (auto& v : model.importances)
      v /= total;
  return model;
}

std::vector<ClassId>
predict(const ForestModel& model, const Matrix& features)
{
  if (features.rows() > 0 && features.cols() != model.feature_names.size())
    throw Error("model expects " + std::to_string(model.feature_names.size()) +
                " feature columns, got " + std::to_string(features.cols()));
  const std::size_t k = model.n_classes();
  std::vector<ClassId> out(features.rows());
  parallel_for(features.rows(), 0, [&](std::size_t begin, std::size_t end) {
    std::vector<double> votes(k);
    for (std::size_t i = begin; i < end; ++i) {
      std::fill(votes.begin(), votes.end(), 0.0);
      for (const auto& tree : model.trees) {
        const auto probs = tree.leaf_for(features.row(i), k);
        for (std::size_t c = 0; c < k; ++c)
          votes[c] += probs[c];
      }
      std::size_t best = 0;
      for (std::size_t c = 1; c < k; ++c)
        if (votes[c] > votes[best])
          best = c;
      out[i] = model.class_ids[best];
    }
  });
  return out;
}

std::vector<ClassId>
predict(const ForestModel& model, const Matrix& features, const std::vector<std::string>& column_names)
{
  if (column_names != model.feature_names) {
    const auto join = [](const std::vector<std::string>& v) {
      std::string s;
      for (const auto& n : v)
        s += (s.empty() ? "" : ",") + n;
      return s;
    };
    throw Error("column mismatch: model expects [" + join(model.feature_names) + "], received [" +
                join(column_names) + "]");
  }
  return predict(model, features);
}

std::vector<std::pair<std::string, double>>
feature_importance(const ForestModel& model)
{
  std::vector<std::pair<std::string, double>> out;
  for (std::size_t f = 0; f < model.feature_names.size(); ++f)
    out.emplace_back(model.feature_names[f], model.importances.at(f));
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

FeatureSet
select_top_features(const std::vector<std::pair<std::string, double>>& importances,
                    const SelectionRule& rule)
{
  if (importances.empty())
    throw Error("importance list is empty");
  std::vector<std::pair<std::string, double>> sorted;
  for (const auto& entry : importances)
    if (entry.first != "x" && entry.first != "y" && entry.first != "z")
      sorted.push_back(entry);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  FeatureSet set;
  if (const auto* threshold = std::get_if<double>(&rule)) {
    for (const auto& [name, score] : sorted)
      if (score > *threshold)
        set.columns.push_back(name);
    if (set.columns.empty())
      throw Error("no feature scores above " + std::to_string(*threshold) +
                  "; try a lower threshold");
  } else {
    const std::size_t k = std::get<TopK>(rule).k;
    if (k == 0)
      throw Error("top-k selection needs k >= 1");
    for (std::size_t i = 0; i < std::min(k, sorted.size()); ++i)
      set.columns.push_back(sorted[i].first);
    if (set.columns.empty())
      throw Error("no geometric features to select");
  }
  set.name = "XYZ+" + std::to_string(set.columns.size()) + "F";
  return set;
}

void
save_importance_csv(const std::vector<std::pair<std::string, double>>& importances,
                    const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string());
  out << "feature,score\n";
  for (const auto& [name, score] : importances)
    out << name << ',' << text::shortest(score) << '\n';
  out.flush();
  if (!out)
    throw Error("write failed for " + path.string());
}

namespace {

constexpr char model_magic[8] = { 'F', 'C', 'D', 'R', 'F', 'M', 'D', 'L' };

class Writer
{
public:
  explicit Writer(std::ofstream& out)
    : out_(out)
  {}

  void bytes(const void* data, std::size_t n) { out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(n)); }

  void u64(std::uint64_t v)
  {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i)
      b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 8);
  }
  void u32(std::uint32_t v)
  {
    unsigned char b[4];
    for (int i = 0; i < 4; ++i)
      b[i] = static_cast<unsigned char>(v >> (8 * i));
    bytes(b, 4);
  }
  void i32(std::int32_t v) { u32(static_cast<std::uint32_t>(v)); }
  void f64(double v)
  {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    u64(bits);
  }
  void str(const std::string& s)
  {
    u32(static_cast<std::uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }

private:
  std::ofstream& out_;
};

class Reader
{
public:
  Reader(std::ifstream& in, std::string source)
    : in_(in)
    , source_(std::move(source))
  {}

  void bytes(void* data, std::size_t n)
  {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(n));
    if (in_.gcount() != static_cast<std::streamsize>(n))
      throw FormatError(source_ + ": truncated model file");
  }
  std::uint64_t u64()
  {
    unsigned char b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }
  std::uint32_t u32()
  {
    unsigned char b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64()
  {
    const std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
  std::string str()
  {
    const auto n = u32();
    if (n > (1u << 20))
      throw FormatError(source_ + ": implausible string length");
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  std::uint64_t count(std::uint64_t limit)
  {
    const auto n = u64();
    if (n > limit)
      throw FormatError(source_ + ": implausible element count");
    return n;
  }

private:
  std::ifstream& in_;
  std::string source_;
};

} // namespace

void
save_model(const ForestModel& model, const std::filesystem::path& path)
{
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write " + path.string());
  Writer w(out);
  w.bytes(model_magic, sizeof model_magic);
  w.u32(model_format_version);

  const auto& p = model.params;
  w.u64(p.n_trees);
  w.u64(p.max_depth.value_or(0));
  w.u64(p.min_samples_leaf);
  w.u64(p.features_per_split.value_or(0));
  w.f64(p.bootstrap_fraction);
  w.u64(p.rng_seed);

  w.u64(model.feature_names.size());
  for (const auto& name : model.feature_names)
    w.str(name);
  w.u64(model.class_ids.size());
  for (std::size_t c = 0; c < model.class_ids.size(); ++c) {
    w.i32(model.class_ids[c]);
    w.u64(model.class_counts[c]);
  }
  for (const double v : model.importances)
    w.f64(v);

  w.u64(model.trees.size());
  for (const auto& tree : model.trees) {
    w.u64(tree.nodes.size());
    for (const auto& node : tree.nodes) {
      w.i32(node.feature);
      w.f64(node.threshold);
      w.i32(node.left);
      w.i32(node.right);
      w.i32(node.leaf);
    }
    w.u64(tree.leaf_probabilities.size());
    for (const double v : tree.leaf_probabilities)
      w.f64(v);
  }
  out.flush();
  if (!out)
    throw Error("write failed for " + path.string());
}

ForestModel
load_model(const std::filesystem::path& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open " + path.string());
  const std::string source = path.string();
  Reader r(in, source);

  char magic[sizeof model_magic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, model_magic, sizeof magic) != 0)
    throw FormatError(source + ": not a forest model file (bad magic)");
  const auto version = r.u32();
  if (version != model_format_version)
    throw FormatError(source + ": model format version " + std::to_string(version) +
                      " is not supported (this build reads version " +
                      std::to_string(model_format_version) + ")");

  ForestModel model;
  auto& p = model.params;
  p.n_trees = r.u64();
  if (const auto d = r.u64())
    p.max_depth = d;
  p.min_samples_leaf = r.u64();
  if (const auto f = r.u64())
    p.features_per_split = f;
  p.bootstrap_fraction = r.f64();
  p.rng_seed = r.u64();

  constexpr std::uint64_t limit = 1ull << 32;
  const auto n_features = r.count(limit);
  for (std::uint64_t i = 0; i < n_features; ++i)
    model.feature_names.push_back(r.str());
  const auto n_classes = r.count(limit);
  for (std::uint64_t c = 0; c < n_classes; ++c) {
    model.class_ids.push_back(r.i32());
    model.class_counts.push_back(r.u64());
  }
  for (std::uint64_t i = 0; i < n_features; ++i)
    model.importances.push_back(r.f64());

  const auto n_trees = r.count(limit);
  model.trees.resize(n_trees);
  for (auto& tree : model.trees) {
    tree.nodes.resize(r.count(limit));
    for (auto& node : tree.nodes) {
      node.feature = r.i32();
      node.threshold = r.f64();
      node.left = r.i32();
      node.right = r.i32();
      node.leaf = r.i32();
    }
    tree.leaf_probabilities.resize(r.count(1ull << 40));
    for (auto& v : tree.leaf_probabilities)
      v = r.f64();
    const auto n_nodes = static_cast<std::int64_t>(tree.nodes.size());
    if (n_nodes == 0)
      throw FormatError(source + ": empty tree");
    for (std::int64_t id = 0; id < n_nodes; ++id) {
      const auto& node = tree.nodes[static_cast<std::size_t>(id)];
      if (node.feature >= static_cast<std::int64_t>(n_features))
        throw FormatError(source + ": split feature index out of range");
      // Children always follow their parent, which rules out cycles.
      if (node.feature >= 0 && (node.left <= id || node.right <= id || node.left >= n_nodes ||
                                node.right >= n_nodes))
        throw FormatError(source + ": child index out of range");
      if (node.feature < 0 && (node.leaf < 0 || static_cast<std::uint64_t>(node.leaf + 1) * n_classes >
                                                  tree.leaf_probabilities.size()))
        throw FormatError(source + ": leaf index out of range");
    }
  }
  char extra;
  if (in.read(&extra, 1); in.gcount() != 0)
    throw FormatError(source + ": trailing bytes after model");
  return model;
}

} // namespace facade
