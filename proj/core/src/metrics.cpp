#include "ponzilens/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "ponzilens/rng.hpp"

namespace ponzilens {

ConfusionMatrix confusion(std::span<const int> labels, std::span<const double> probabilities,
                          double threshold) {
  if (labels.size() != probabilities.size()) {
    throw Error("confusion: labels and probabilities differ in length");
  }
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++cm.tp : ++cm.fn;
    } else {
      predicted ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

double auc_score(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw Error("auc: labels and scores differ in length");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  double positive_rank_sum = 0.0;
  std::size_t n_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    // Average 1-based rank over the tie group [i, j).
    const double rank = static_cast<double>(i + 1 + j) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) {
        positive_rank_sum += rank;
        ++n_pos;
      }
    }
    i = j;
  }
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error("auc: needs both classes");
  const double u = positive_rank_sum - static_cast<double>(n_pos) *
                                           static_cast<double>(n_pos + 1) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricReport compute_metrics(const ConfusionMatrix& cm, std::span<const int> labels,
                             std::span<const double> probabilities) {
  MetricReport report;
  const double n = static_cast<double>(cm.total());
  report.accuracy = n > 0 ? static_cast<double>(cm.tp + cm.tn) / n : 0.0;
  report.precision =
      cm.tp + cm.fp > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fp) : 0.0;
  report.recall =
      cm.tp + cm.fn > 0 ? static_cast<double>(cm.tp) / static_cast<double>(cm.tp + cm.fn) : 0.0;
  report.f1 = report.precision + report.recall > 0.0
                  ? 2.0 * report.precision * report.recall / (report.precision + report.recall)
                  : 0.0;
  report.auc = labels.empty() ? 0.0 : auc_score(labels, probabilities);
  return report;
}

std::vector<RocPoint> roc_points(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw Error("roc: labels and scores differ in length");
  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  std::int64_t n_pos = 0, n_neg = 0;
  for (int label : labels) label == 1 ? ++n_pos : ++n_neg;

  std::vector<RocPoint> points;
  points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::int64_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = scores[order[i]];
    while (i < order.size() && scores[order[i]] == score) {
      labels[order[i]] == 1 ? ++tp : ++fp;
      ++i;
    }
    points.push_back({n_neg > 0 ? static_cast<double>(fp) / static_cast<double>(n_neg) : 0.0,
                      n_pos > 0 ? static_cast<double>(tp) / static_cast<double>(n_pos) : 0.0,
                      score});
  }
  return points;
}

namespace {

std::vector<std::vector<std::size_t>> indices_by_class(std::span<const int> labels) {
  std::vector<std::vector<std::size_t>> by_class(2);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    by_class[labels[i] == 1 ? 1 : 0].push_back(i);
  }
  return by_class;
}

}  // namespace

SplitPlan stratified_split(std::span<const int> labels, double test_fraction,
                           std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw Error("stratified_split: test_fraction must be in (0, 1)");
  }
  auto by_class = indices_by_class(labels);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty()) {
      throw Error("stratified_split: class " + std::to_string(c) + " has no members");
    }
  }

  const double n = static_cast<double>(labels.size());
  // ceil keeps the published 80/20 split arithmetic: 4422 rows at 0.2 must
  // give an 885-row test set, not 884. Capped so at least one training
  // sample per class survives.
  auto target_total = static_cast<std::size_t>(std::ceil(n * test_fraction - 1e-9));
  target_total = std::min(target_total, labels.size() - by_class.size());

  std::vector<std::size_t> take(by_class.size());
  std::size_t allocated = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    take[c] = static_cast<std::size_t>(
        std::floor(static_cast<double>(by_class[c].size()) * test_fraction + 0.5));
    allocated += take[c];
  }
  // Nudge the largest class first; each step keeps every class within one
  // sample of its proportional share.
  while (allocated != target_total) {
    std::size_t pick = by_class[0].size() >= by_class[1].size() ? 0 : 1;
    if (allocated < target_total) {
      if (take[pick] + 1 >= by_class[pick].size()) pick = 1 - pick;
      ++take[pick];
      ++allocated;
    } else {
      if (take[pick] <= 1) pick = 1 - pick;
      --take[pick];
      --allocated;
    }
  }

  SplitPlan plan;
  plan.seed = seed;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<std::size_t> pool = by_class[c];
    Rng rng(derive_seed(seed, 101 + c));
    rng.shuffle(pool);
    for (std::size_t i = 0; i < pool.size(); ++i) {
      (i < take[c] ? plan.test_indices : plan.train_indices).push_back(pool[i]);
    }
  }
  std::sort(plan.train_indices.begin(), plan.train_indices.end());
  std::sort(plan.test_indices.begin(), plan.test_indices.end());
  return plan;
}

std::vector<std::vector<std::size_t>> stratified_kfold(std::span<const int> labels, int k,
                                                       std::uint64_t seed) {
  if (k < 2) throw Error("kfold: k must be >= 2");
  auto by_class = indices_by_class(labels);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].size() < static_cast<std::size_t>(k)) {
      throw Error("kfold: class " + std::to_string(c) + " has fewer than k members");
    }
  }

  std::vector<std::vector<std::size_t>> folds(static_cast<std::size_t>(k));
  // Dealing continues across classes so overall fold sizes differ by <= 1.
  std::size_t next_fold = 0;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    std::vector<std::size_t> pool = by_class[c];
    Rng rng(derive_seed(seed, 201 + c));
    rng.shuffle(pool);
    for (std::size_t index : pool) {
      folds[next_fold].push_back(index);
      next_fold = (next_fold + 1) % folds.size();
    }
  }
  for (auto& fold : folds) std::sort(fold.begin(), fold.end());
  return folds;
}

namespace {

// P(Bin(n, 1/2) >= m) with exact binomial coefficients; n stays small enough
// (discordant pairs) that doubles hold the terms exactly.
double binomial_upper_tail_half(std::int64_t n, std::int64_t m) {
  if (m <= 0) return 1.0;
  if (m > n) return 0.0;
  long double tail = 0.0L;
  long double coeff = 1.0L;  // C(n, m), built incrementally
  for (std::int64_t i = 0; i < m; ++i) {
    coeff = coeff * static_cast<long double>(n - i) / static_cast<long double>(i + 1);
  }
  for (std::int64_t k = m; k <= n; ++k) {
    tail += coeff;
    coeff = coeff * static_cast<long double>(n - k) / static_cast<long double>(k + 1);
  }
  return static_cast<double>(tail * std::pow(0.5L, static_cast<long double>(n)));
}

}  // namespace

McNemarResult mcnemar(std::span<const int> labels, std::span<const int> preds_a,
                      std::span<const int> preds_b) {
  if (labels.size() != preds_a.size() || labels.size() != preds_b.size()) {
    throw Error("mcnemar: input lengths differ");
  }
  McNemarResult result;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool a_correct = preds_a[i] == labels[i];
    const bool b_correct = preds_b[i] == labels[i];
    if (a_correct && !b_correct) ++result.b;
    if (!a_correct && b_correct) ++result.c;
  }

  const std::int64_t discordant = result.b + result.c;
  if (discordant == 0) {
    result.degenerate = true;
    result.p_exact = 1.0;
    result.p_chi2_cc = 1.0;
    return result;
  }

  const std::int64_t m = std::max(result.b, result.c);
  result.p_exact = std::min(1.0, 2.0 * binomial_upper_tail_half(discordant, m));

  const double diff = std::abs(static_cast<double>(result.b - result.c));
  const double corrected = std::max(0.0, diff - 1.0);
  const double chi2 = corrected * corrected / static_cast<double>(discordant);
  result.p_chi2_cc = std::erfc(std::sqrt(chi2 / 2.0));
  return result;
}

}  // namespace ponzilens
