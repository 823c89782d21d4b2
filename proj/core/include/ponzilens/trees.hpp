#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ponzilens/features.hpp"

namespace ponzilens {

enum class ModelKind { DecisionTree, RandomForest, Gbdt };

std::string_view model_kind_name(ModelKind kind);
ModelKind model_kind_from_name(std::string_view name);

struct TrainConfig {
  ModelKind model_kind = ModelKind::Gbdt;
  int n_estimators = 100;
  int max_depth = 6;
  double learning_rate = 0.1;
  double colsample = 1.0;   // fraction of columns, per tree (GBDT) / per split (forest)
  double reg_alpha = 0.0;   // L1 on gradient sums
  double reg_lambda = 1.0;  // L2 on leaf weights
  int min_samples_leaf = 1;
  int n_bins = 255;
  std::uint64_t seed = 0;

  void validate() const;  // throws Error
  bool operator==(const TrainConfig&) const = default;
};

// Flat node storage, root at index 0. Routing: feature value <= threshold
// goes left. Leaves hold the margin contribution (GBDT, shrinkage already
// folded in) or the class-1 probability (tree/forest).
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  double gain = 0.0;
  double cover = 0.0;  // training rows routed through this node
  int left = -1;
  int right = -1;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> row) const;
  int max_node_depth() const;
};

struct Model {
  ModelKind kind = ModelKind::Gbdt;
  TrainConfig config;
  FeatureCatalog catalog;  // feature order at fit time
  std::vector<Tree> trees;
  double base_score = 0.0;  // log-odds of the training prior (GBDT)
  std::vector<std::int64_t> split_counts;  // per catalog feature
  bool has_covers = true;

  std::size_t n_features() const { return catalog.active.size(); }

  double predict_margin_row(std::span<const double> row) const;  // GBDT only
  std::vector<double> predict_margin(const FeatureMatrix& m) const;

  // Probability of the Ponzi class per row. `n_trees_limit` truncates the
  // ensemble (forests average, boosters sum); -1 uses every tree.
  std::vector<double> predict_proba(const FeatureMatrix& m, int n_trees_limit = -1) const;
};

// Trains the configured model kind. Boosting and forests require both
// classes in the labels; a lone decision tree accepts pure inputs.
Model fit(const FeatureMatrix& m, const TrainConfig& cfg, int jobs = 1);

// Descending split count; ties keep catalog order.
std::vector<std::pair<std::string, std::int64_t>> split_count_importance(const Model& model);

std::string model_to_json(const Model& model);
Model model_from_json(const std::string& text);
void save_model(const std::string& path, const Model& model);
Model load_model(const std::string& path);

}  // namespace ponzilens
