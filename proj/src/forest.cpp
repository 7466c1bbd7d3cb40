#include "dataloc/forest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

#include "dataloc/error.hpp"
#include "dataloc/parallel.hpp"
#include "dataloc/random.hpp"
#include "dataloc/text.hpp"

namespace dataloc {

std::size_t MaxFeatures::resolve(std::size_t feature_count) const {
  switch (kind) {
    case Kind::Sqrt: {
      auto m = static_cast<std::size_t>(std::sqrt(static_cast<double>(feature_count)));
      while (m * m > feature_count) --m;
      while ((m + 1) * (m + 1) <= feature_count) ++m;
      return std::max<std::size_t>(m, 1);
    }
    case Kind::All: return feature_count;
    case Kind::Fixed: return k;
  }
  return feature_count;
}

MaxFeatures MaxFeatures::parse(std::string_view s) {
  if (s == "sqrt") return sqrt();
  if (s == "all") return all();
  const auto k = text::parse_int(s);
  if (!k || *k < 1) throw Error(Errc::InvalidArgument, "max_features must be sqrt, all or a positive integer");
  return fixed(static_cast<std::size_t>(*k));
}

std::string MaxFeatures::to_string() const {
  switch (kind) {
    case Kind::Sqrt: return "sqrt";
    case Kind::All: return "all";
    case Kind::Fixed: return std::to_string(k);
  }
  return "sqrt";
}

void ForestConfig::validate(std::size_t feature_count) const {
  if (n_estimators < 1) throw Error(Errc::InvalidArgument, "n_estimators must be >= 1");
  if (max_depth < 1) throw Error(Errc::InvalidArgument, "max_depth must be >= 1");
  if (min_samples_split < 1) throw Error(Errc::InvalidArgument, "min_samples_split must be >= 1");
  if (max_features.kind == MaxFeatures::Kind::Fixed &&
      (max_features.k < 1 || max_features.k > feature_count)) {
    throw Error(Errc::InvalidArgument, "max_features " + std::to_string(max_features.k) + " outside [1, " +
                                           std::to_string(feature_count) + "]");
  }
}

std::size_t DecisionTree::predict_index(std::span<const double> row) const {
  std::size_t at = 0;
  while (!nodes[at].leaf()) {
    const auto& n = nodes[at];
    at = static_cast<std::size_t>(row[static_cast<std::size_t>(n.feature)] <= n.threshold ? n.left : n.right);
  }
  return static_cast<std::size_t>(nodes[at].label);
}

int DecisionTree::depth() const {
  if (nodes.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [at, d] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, d);
    if (!nodes[at].leaf()) {
      stack.emplace_back(static_cast<std::size_t>(nodes[at].left), d + 1);
      stack.emplace_back(static_cast<std::size_t>(nodes[at].right), d + 1);
    }
  }
  return deepest;
}

std::vector<std::uint32_t> ForestModel::votes(std::span<const double> row) const {
  if (row.size() != device_universe.size()) {
    throw Error(Errc::DimensionMismatch, "row has " + std::to_string(row.size()) + " features, model expects " +
                                             std::to_string(device_universe.size()));
  }
  std::vector<std::uint32_t> counts(classes.size(), 0);
  for (const auto& tree : trees) ++counts[tree.predict_index(row)];
  return counts;
}

double gini_impurity(std::span<const std::uint32_t> class_counts) {
  const double n = std::accumulate(class_counts.begin(), class_counts.end(), 0.0);
  if (n == 0.0) return 0.0;
  double sum_sq = 0.0;
  for (auto c : class_counts) sum_sq += (c / n) * (c / n);
  return 1.0 - sum_sq;
}

namespace {

using Int128 = __int128;

/// Index of the largest count; ties resolve to the lowest index, which is
/// the lexicographically smallest label because classes are sorted.
std::int32_t argmax_lowest(std::span<const std::uint32_t> counts) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < counts.size(); ++c) {
    if (counts[c] > counts[best]) best = c;
  }
  return static_cast<std::int32_t>(best);
}

struct Split {
  std::size_t feature = 0;
  double threshold = 0.0;
  // Gini reduction is monotone in (S_L / n_L + S_R / n_R), S = sum of squared
  // class counts. Kept as an exact fraction so equal gains compare equal.
  Int128 score_num = 0;
  Int128 score_den = 1;
};

bool better(const Split& a, const Split& b) {
  return a.score_num * b.score_den > b.score_num * a.score_den;
}

class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& matrix, std::span<const std::uint32_t> class_of,
              std::size_t class_count, const ForestConfig& config, CounterRng& rng)
      : matrix_(matrix),
        class_of_(class_of),
        class_count_(class_count),
        config_(config),
        candidates_(config.max_features.resolve(matrix.cols())),
        rng_(rng) {
    feature_order_.resize(matrix.cols());
  }

  DecisionTree build(std::vector<std::uint32_t> rows) {
    tree_.nodes.clear();
    grow(std::move(rows), 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::uint32_t> rows, int depth) {
    const auto id = static_cast<std::int32_t>(tree_.nodes.size());
    tree_.nodes.emplace_back();

    std::vector<std::uint32_t> counts(class_count_, 0);
    for (auto r : rows) ++counts[class_of_[r]];
    const bool pure = std::count_if(counts.begin(), counts.end(), [](auto c) { return c > 0; }) <= 1;

    std::optional<Split> split;
    if (depth < config_.max_depth && !pure && rows.size() >= static_cast<std::size_t>(config_.min_samples_split)) {
      split = best_split(rows, counts);
    }
    if (!split) {
      auto& leaf = tree_.nodes[static_cast<std::size_t>(id)];
      leaf.label = argmax_lowest(counts);
      leaf.class_counts = std::move(counts);
      return id;
    }

    std::vector<std::uint32_t> left_rows;
    std::vector<std::uint32_t> right_rows;
    for (auto r : rows) {
      (matrix_.values[r * matrix_.cols() + split->feature] <= split->threshold ? left_rows : right_rows).push_back(r);
    }
    rows.clear();
    rows.shrink_to_fit();
    const auto left = grow(std::move(left_rows), depth + 1);
    const auto right = grow(std::move(right_rows), depth + 1);
    auto& node = tree_.nodes[static_cast<std::size_t>(id)];
    node.feature = static_cast<std::int32_t>(split->feature);
    node.threshold = split->threshold;
    node.left = left;
    node.right = right;
    return id;
  }

  std::vector<std::size_t> sample_features() {
    const auto f = matrix_.cols();
    std::iota(feature_order_.begin(), feature_order_.end(), std::size_t{0});
    if (candidates_ >= f) return feature_order_;
    for (std::size_t i = 0; i < candidates_; ++i) {
      const auto j = i + static_cast<std::size_t>(rng_.below(f - i));
      std::swap(feature_order_[i], feature_order_[j]);
    }
    std::vector<std::size_t> picked(feature_order_.begin(),
                                    feature_order_.begin() + static_cast<std::ptrdiff_t>(candidates_));
    std::sort(picked.begin(), picked.end());
    return picked;
  }

  std::optional<Split> best_split(const std::vector<std::uint32_t>& rows, const std::vector<std::uint32_t>& counts) {
    const auto n = static_cast<std::int64_t>(rows.size());
    std::int64_t parent_sq = 0;
    for (auto c : counts) parent_sq += static_cast<std::int64_t>(c) * c;

    std::optional<Split> best;
    std::vector<std::pair<double, std::uint32_t>> column(rows.size());
    std::vector<std::int64_t> left(class_count_);
    std::vector<std::int64_t> right(class_count_);

    for (const auto feature : sample_features()) {
      for (std::size_t i = 0; i < rows.size(); ++i) {
        column[i] = {matrix_.values[rows[i] * matrix_.cols() + feature], class_of_[rows[i]]};
      }
      std::sort(column.begin(), column.end());
      if (column.front().first == column.back().first) continue;

      std::fill(left.begin(), left.end(), 0);
      std::copy(counts.begin(), counts.end(), right.begin());
      std::int64_t left_sq = 0;
      std::int64_t right_sq = parent_sq;
      for (std::size_t i = 0; i + 1 < column.size(); ++i) {
        const auto c = column[i].second;
        left_sq += 2 * left[c] + 1;
        right_sq -= 2 * right[c] - 1;
        ++left[c];
        --right[c];
        const double lo = column[i].first;
        const double hi = column[i + 1].first;
        if (lo == hi) continue;

        const auto n_left = static_cast<std::int64_t>(i + 1);
        const auto n_right = n - n_left;
        Split candidate;
        candidate.feature = feature;
        candidate.threshold = lo + (hi - lo) / 2.0;
        if (!(candidate.threshold < hi)) candidate.threshold = lo;
        candidate.score_num = Int128(left_sq) * n_right + Int128(right_sq) * n_left;
        candidate.score_den = Int128(n_left) * n_right;
        // Must strictly reduce impurity relative to the parent (S_P / n).
        if (!(candidate.score_num * n > Int128(parent_sq) * candidate.score_den)) continue;
        // Features and thresholds are visited in ascending order, so only a
        // strictly better score replaces the incumbent.
        if (!best || better(candidate, *best)) best = candidate;
      }
    }
    return best;
  }

  const FeatureMatrix& matrix_;
  std::span<const std::uint32_t> class_of_;
  std::size_t class_count_;
  const ForestConfig& config_;
  std::size_t candidates_;
  CounterRng& rng_;
  std::vector<std::size_t> feature_order_;
  DecisionTree tree_;
};

}  // namespace

ForestModel train_forest(const FeatureMatrix& matrix, const ForestConfig& config, unsigned jobs) {
  if (matrix.rows() == 0) throw Error(Errc::EmptyMatrix, "cannot train on an empty matrix");
  matrix.validate();
  config.validate(matrix.cols());

  ForestModel model;
  model.config = config;
  model.device_universe = matrix.device_universe;
  const std::set<std::string> distinct(matrix.labels.begin(), matrix.labels.end());
  if (distinct.size() < 2) throw Error(Errc::SingleClass, "training data has a single class");
  model.classes.assign(distinct.begin(), distinct.end());

  std::vector<std::uint32_t> class_of(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    class_of[r] = static_cast<std::uint32_t>(
        std::lower_bound(model.classes.begin(), model.classes.end(), matrix.labels[r]) - model.classes.begin());
  }

  const auto n = matrix.rows();
  model.trees.resize(static_cast<std::size_t>(config.n_estimators));
  parallel_for(model.trees.size(), jobs, [&](std::size_t t) {
    CounterRng rng(derive_seed(config.seed, {static_cast<std::uint64_t>(t)}));
    std::vector<std::uint32_t> rows(n);
    if (config.bootstrap) {
      for (auto& r : rows) r = static_cast<std::uint32_t>(rng.below(n));
    } else {
      std::iota(rows.begin(), rows.end(), 0u);
    }
    TreeBuilder builder(matrix, class_of, model.classes.size(), config, rng);
    model.trees[t] = builder.build(std::move(rows));
  });
  return model;
}

std::string predict(const ForestModel& model, std::span<const double> row) {
  const auto counts = model.votes(row);
  return model.classes[static_cast<std::size_t>(argmax_lowest(counts))];
}

std::vector<std::string> predict_all(const ForestModel& model, const FeatureMatrix& matrix) {
  if (matrix.device_universe != model.device_universe) {
    throw Error(Errc::DimensionMismatch, "matrix columns differ from the model's device universe");
  }
  std::vector<std::string> out;
  out.reserve(matrix.rows());
  for (std::size_t r = 0; r < matrix.rows(); ++r) out.push_back(predict(model, matrix.row(r)));
  return out;
}

double evaluate(const ForestModel& model, const FeatureMatrix& matrix) {
  const auto predicted = predict_all(model, matrix);
  if (predicted.empty()) throw Error(Errc::EmptyMatrix, "nothing to evaluate");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < predicted.size(); ++r) correct += predicted[r] == matrix.labels[r];
  return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

std::string serialize_model(const ForestModel& model) {
  const auto& c = model.config;
  std::string out = "dataloc-forest " + std::to_string(kModelFormatVersion) + '\n';
  out += "n_estimators " + std::to_string(c.n_estimators) + '\n';
  out += "max_depth " + std::to_string(c.max_depth) + '\n';
  out += "max_features " + c.max_features.to_string() + '\n';
  out += "min_samples_split " + std::to_string(c.min_samples_split) + '\n';
  out += std::string("bootstrap ") + (c.bootstrap ? "1" : "0") + '\n';
  out += "seed " + std::to_string(c.seed) + '\n';
  out += "universe " + std::to_string(model.device_universe.size()) + '\n';
  for (const auto& b : model.device_universe) out += b + '\n';
  out += "classes " + std::to_string(model.classes.size()) + '\n';
  for (const auto& label : model.classes) out += text::encode_field(label) + '\n';
  for (std::size_t t = 0; t < model.trees.size(); ++t) {
    const auto& nodes = model.trees[t].nodes;
    out += "tree " + std::to_string(t) + ' ' + std::to_string(nodes.size()) + '\n';
    for (const auto& node : nodes) {
      if (node.leaf()) {
        out += "L " + std::to_string(node.label);
        for (auto count : node.class_counts) out += ' ' + std::to_string(count);
      } else {
        out += "I " + std::to_string(node.feature) + ' ' + text::format_double(node.threshold) + ' ' +
               std::to_string(node.left) + ' ' + std::to_string(node.right);
      }
      out += '\n';
    }
  }
  out += "end\n";
  return out;
}

namespace {

class ModelReader {
 public:
  explicit ModelReader(std::string_view contents) : lines_(text::lines(contents)) {}

  std::string_view line() {
    if (at_ >= lines_.size()) corrupt("unexpected end of file");
    return lines_[at_++];
  }

  std::vector<std::string_view> words() { return text::split(line(), ' '); }

  std::int64_t keyed_int(std::string_view key) {
    const auto w = words();
    if (w.size() != 2 || w[0] != key) corrupt("expected '" + std::string(key) + "'");
    return to_int(w[1]);
  }

  std::string keyed_word(std::string_view key) {
    const auto w = words();
    if (w.size() != 2 || w[0] != key) corrupt("expected '" + std::string(key) + "'");
    return std::string(w[1]);
  }

  std::int64_t to_int(std::string_view s) {
    const auto v = text::parse_int(s);
    if (!v) corrupt("bad integer '" + std::string(s) + "'");
    return *v;
  }

  bool done() const { return at_ == lines_.size(); }

  [[noreturn]] void corrupt(const std::string& why) const {
    throw Error(Errc::CorruptModel, at_ == 0 ? 1 : at_, why);
  }

 private:
  std::vector<std::string_view> lines_;
  std::size_t at_ = 0;
};

}  // namespace

ForestModel deserialize_model(std::string_view contents) {
  ModelReader in(contents);
  {
    const auto w = in.words();
    if (w.size() != 2 || w[0] != "dataloc-forest") in.corrupt("not a dataloc forest model");
    const auto version = in.to_int(w[1]);
    if (version != kModelFormatVersion) {
      throw Error(Errc::VersionMismatch, "model format version " + std::to_string(version) + ", expected " +
                                             std::to_string(kModelFormatVersion));
    }
  }
  ForestModel m;
  auto& c = m.config;
  c.n_estimators = static_cast<int>(in.keyed_int("n_estimators"));
  c.max_depth = static_cast<int>(in.keyed_int("max_depth"));
  try {
    c.max_features = MaxFeatures::parse(in.keyed_word("max_features"));
  } catch (const Error& e) {
    if (e.code() == Errc::CorruptModel) throw;
    in.corrupt("bad max_features");
  }
  c.min_samples_split = static_cast<int>(in.keyed_int("min_samples_split"));
  const auto bootstrap = in.keyed_int("bootstrap");
  if (bootstrap != 0 && bootstrap != 1) in.corrupt("bootstrap must be 0 or 1");
  c.bootstrap = bootstrap == 1;
  {
    const auto seed_word = in.keyed_word("seed");
    std::uint64_t seed = 0;
    auto [end, ec] = std::from_chars(seed_word.data(), seed_word.data() + seed_word.size(), seed);
    if (ec != std::errc{} || end != seed_word.data() + seed_word.size()) in.corrupt("bad seed");
    c.seed = seed;
  }

  const auto universe_size = in.keyed_int("universe");
  if (universe_size < 1) in.corrupt("empty universe");
  for (std::int64_t i = 0; i < universe_size; ++i) {
    const auto b = in.line();
    if (!is_canonical_bssid(b)) in.corrupt("bad bssid");
    m.device_universe.emplace_back(b);
  }
  if (!std::is_sorted(m.device_universe.begin(), m.device_universe.end()) ||
      std::adjacent_find(m.device_universe.begin(), m.device_universe.end()) != m.device_universe.end()) {
    in.corrupt("universe not sorted");
  }
  const auto class_count = in.keyed_int("classes");
  if (class_count < 2) in.corrupt("fewer than two classes");
  for (std::int64_t i = 0; i < class_count; ++i) {
    auto label = text::decode_field(in.line());
    if (!label || label->empty()) in.corrupt("bad class label");
    m.classes.push_back(std::move(*label));
  }
  if (!std::is_sorted(m.classes.begin(), m.classes.end()) ||
      std::adjacent_find(m.classes.begin(), m.classes.end()) != m.classes.end()) {
    in.corrupt("classes not sorted");
  }
  try {
    c.validate(m.device_universe.size());
  } catch (const Error&) {
    in.corrupt("invalid configuration");
  }

  const auto features = static_cast<std::int64_t>(m.device_universe.size());
  for (int t = 0; t < c.n_estimators; ++t) {
    const auto w = in.words();
    if (w.size() != 3 || w[0] != "tree" || in.to_int(w[1]) != t) in.corrupt("expected tree header");
    const auto node_count = in.to_int(w[2]);
    if (node_count < 1) in.corrupt("empty tree");
    DecisionTree tree;
    for (std::int64_t i = 0; i < node_count; ++i) {
      const auto f = in.words();
      TreeNode node;
      if (f.size() == 5 && f[0] == "I") {
        node.feature = static_cast<std::int32_t>(in.to_int(f[1]));
        const auto threshold = text::parse_double(f[2]);
        if (!threshold) in.corrupt("bad threshold");
        node.threshold = *threshold;
        node.left = static_cast<std::int32_t>(in.to_int(f[3]));
        node.right = static_cast<std::int32_t>(in.to_int(f[4]));
        // Children always follow their parent in pre-order.
        if (node.feature < 0 || node.feature >= features || node.left <= i || node.right <= i ||
            node.left >= node_count || node.right >= node_count) {
          in.corrupt("bad internal node");
        }
      } else if (f.size() == static_cast<std::size_t>(2 + class_count) && f[0] == "L") {
        node.label = static_cast<std::int32_t>(in.to_int(f[1]));
        if (node.label < 0 || node.label >= class_count) in.corrupt("bad leaf label");
        for (std::size_t k = 2; k < f.size(); ++k) {
          const auto count = in.to_int(f[k]);
          if (count < 0) in.corrupt("negative class count");
          node.class_counts.push_back(static_cast<std::uint32_t>(count));
        }
      } else {
        in.corrupt("bad node line");
      }
      tree.nodes.push_back(std::move(node));
    }
    m.trees.push_back(std::move(tree));
  }
  if (in.line() != "end") in.corrupt("missing end marker");
  if (!in.done()) in.corrupt("trailing data");
  return m;
}

void save_model(const std::filesystem::path& path, const ForestModel& model) {
  text::write_file(path, serialize_model(model));
}

ForestModel load_model(const std::filesystem::path& path) { return deserialize_model(text::read_file(path)); }

}  // namespace dataloc
