#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ponzilens/metrics.hpp"
#include "ponzilens/trees.hpp"

namespace ponzilens {

// Hyper-parameter value lists swept by the grid search. Lists a classifier
// kind does not consume are pinned to their first value for that kind, so
// the candidate set carries no duplicates.
struct GridSpec {
  std::vector<ModelKind> model_kinds;
  std::vector<int> n_estimators;
  std::vector<int> max_depth;
  std::vector<double> learning_rate;
  std::vector<double> colsample;
  std::vector<double> reg_alpha;
  std::vector<double> reg_lambda;

  static GridSpec default_grid();
  static GridSpec from_json_file(const std::string& path);

  // Deterministic enumeration: kinds outermost, then value lists in field
  // order. Candidate seeds derive from (master_seed, candidate index).
  std::vector<TrainConfig> enumerate(std::uint64_t master_seed) const;

  void validate() const;
};

struct CandidateResult {
  TrainConfig config;
  std::vector<double> fold_aucs;
  double mean_auc = 0.0;
  bool failed = false;
  std::string failure;
};

struct SearchResult {
  std::vector<CandidateResult> candidates;  // enumeration order
  std::size_t best_index = 0;
  double best_mean_auc = 0.0;
  Model best_model;  // winner refit on the full input matrix
};

// K-fold cross-validated grid search maximizing mean validation AUC.
// Folds are fixed by (labels, k, seed) and shared by every candidate; ties
// resolve to the earliest candidate. Candidates that fail to train are
// recorded and excluded; if all fail this throws.
SearchResult grid_search_cv(const FeatureMatrix& train, const GridSpec& grid, int k,
                            std::uint64_t seed, int jobs = 1);

struct RfeStep {
  std::vector<std::string> active;
  TrainConfig best_config;
  double mean_cv_auc = 0.0;
  std::string removed;  // empty on the final step
};

struct RfeTrace {
  std::vector<RfeStep> steps;
  std::size_t winner = 0;  // step index with the highest mean CV AUC

  FeatureCatalog winning_catalog() const;
};

// Recursive feature elimination with the feature count as a hyper-parameter:
// each step reruns the grid search, then drops the feature with the lowest
// split count in that step's best model (ties drop the later catalog entry),
// until `floor_features` remain.
RfeTrace recursive_feature_elimination(const FeatureMatrix& full, const GridSpec& grid, int k,
                                       std::uint64_t seed, std::size_t floor_features,
                                       int jobs = 1);

}  // namespace ponzilens
