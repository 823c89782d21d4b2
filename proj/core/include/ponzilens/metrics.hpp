#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "ponzilens/chain.hpp"

namespace ponzilens {

struct ConfusionMatrix {
  std::int64_t tn = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tp = 0;

  std::int64_t total() const { return tn + fp + fn + tp; }
};

struct MetricReport {
  double accuracy = 0.0;
  double auc = 0.0;
  double f1 = 0.0;
  double precision = 0.0;
  double recall = 0.0;
};

// Predicted positive iff p >= threshold (ties go to positive).
ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> probabilities,
                          double threshold = 0.5);

// Rank-based Mann-Whitney AUC, ties counted 0.5.
double auc_score(std::span<const int> labels, std::span<const double> scores);

MetricReport compute_metrics(const ConfusionMatrix& cm, std::span<const int> labels,
                             std::span<const double> probabilities);

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;
};

// One point per distinct score threshold, plus the (0,0) endpoint.
std::vector<RocPoint> roc_points(std::span<const int> labels, std::span<const double> scores);

struct SplitPlan {
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> test_indices;   // ascending
  std::uint64_t seed = 0;
};

// Stratified holdout split. Per-class test counts start from round-half-up of
// class_count * test_fraction and are nudged so the total equals
// ceil(n * test_fraction); selection is a seeded shuffle within each class.
SplitPlan stratified_split(std::span<const int> labels, double test_fraction, std::uint64_t seed);

// Stratified k folds partitioning [0, n); fold sizes differ by at most one.
std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int k,
                                                       std::uint64_t seed);

struct McNemarResult {
  std::int64_t b = 0;  // a correct, b wrong
  std::int64_t c = 0;  // a wrong, b correct
  double p_exact = 1.0;
  double p_chi2_cc = 1.0;  // chi-square with continuity correction, for comparison
  bool degenerate = false;  // b + c == 0
};

McNemarResult mcnemar(std::span<const int> labels, std::span<const int> preds_a,
                      std::span<const int> preds_b);

}  // namespace ponzilens
