#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dataloc/features.hpp"

namespace dataloc {

/// Number of candidate features drawn (without replacement) at every split.
struct MaxFeatures {
  enum class Kind { Sqrt, All, Fixed };
  Kind kind = Kind::Sqrt;
  std::size_t k = 0;  // only for Fixed

  static MaxFeatures sqrt() { return {Kind::Sqrt, 0}; }
  static MaxFeatures all() { return {Kind::All, 0}; }
  static MaxFeatures fixed(std::size_t k) { return {Kind::Fixed, k}; }

  /// Sqrt -> max(1, floor(sqrt(F))); All -> F; Fixed(k) -> k.
  std::size_t resolve(std::size_t feature_count) const;
  /// "sqrt", "all" or a positive integer.
  static MaxFeatures parse(std::string_view s);
  std::string to_string() const;

  bool operator==(const MaxFeatures&) const = default;
};

struct ForestConfig {
  int n_estimators = 10;
  int max_depth = 10;
  MaxFeatures max_features = MaxFeatures::sqrt();
  std::uint64_t seed = 0;
  int min_samples_split = 2;
  /// Trees see bootstrap samples of size N. Turning this off trains every
  /// tree on the full matrix; used for oracle checks.
  bool bootstrap = true;

  void validate(std::size_t feature_count) const;
  bool operator==(const ForestConfig&) const = default;
};

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  double threshold = 0.0;     // rows with x[feature] <= threshold go left
  std::int32_t left = -1;
  std::int32_t right = -1;
  std::int32_t label = -1;  // leaf: index into ForestModel::classes
  std::vector<std::uint32_t> class_counts;  // leaf only

  bool leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

/// Flattened tree; nodes[0] is the root.
struct DecisionTree {
  std::vector<TreeNode> nodes;

  std::size_t predict_index(std::span<const double> row) const;
  /// Longest root-to-leaf path, in edges.
  int depth() const;
  bool operator==(const DecisionTree&) const = default;
};

struct ForestModel {
  ForestConfig config;
  std::vector<DecisionTree> trees;
  std::vector<std::string> device_universe;
  std::vector<std::string> classes;  // sorted

  /// Per-class vote counts; they sum to trees.size().
  std::vector<std::uint32_t> votes(std::span<const double> row) const;
  bool operator==(const ForestModel&) const = default;
};

/// 1 - sum(p_c^2).
double gini_impurity(std::span<const std::uint32_t> class_counts);

ForestModel train_forest(const FeatureMatrix& matrix, const ForestConfig& config, unsigned jobs = 1);

/// Plurality vote; ties go to the lexicographically smallest label.
std::string predict(const ForestModel& model, std::span<const double> row);
std::vector<std::string> predict_all(const ForestModel& model, const FeatureMatrix& matrix);
double evaluate(const ForestModel& model, const FeatureMatrix& matrix);

// Model file, version 1. Line-oriented text:
//   dataloc-forest 1
//   n_estimators <int>
//   max_depth <int>
//   max_features sqrt|all|<k>
//   min_samples_split <int>
//   bootstrap 0|1
//   seed <uint64>
//   universe <F>          followed by F bssid lines
//   classes <C>           followed by C label lines (field-encoded)
//   tree <i> <node_count> followed by node_count lines:
//     I <feature> <threshold> <left> <right>
//     L <label> <count_0> ... <count_C-1>
//   end
inline constexpr int kModelFormatVersion = 1;

std::string serialize_model(const ForestModel& model);
ForestModel deserialize_model(std::string_view contents);
void save_model(const std::filesystem::path& path, const ForestModel& model);
ForestModel load_model(const std::filesystem::path& path);

}  // namespace dataloc
