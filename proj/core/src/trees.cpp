#include "ponzilens/trees.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "ponzilens/json_io.hpp"
#include "ponzilens/parallel.hpp"
#include "ponzilens/rng.hpp"

namespace ponzilens {

namespace {

using ordered_json = nlohmann::ordered_json;

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

// Quantile (equal-frequency) bin upper edges. With enough bins every distinct
// value gets its own bin, which makes histogram splits coincide with exact
// greedy splits.
std::vector<double> build_edges(std::vector<double> sorted, int n_bins) {
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct;
  std::vector<std::size_t> cum;  // count of values <= distinct[j]
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (distinct.empty() || sorted[i] != distinct.back()) {
      distinct.push_back(sorted[i]);
      cum.push_back(i + 1);
    } else {
      cum.back() = i + 1;
    }
  }
  const std::size_t d = distinct.size();
  if (d <= 1) return {};
  if (d <= static_cast<std::size_t>(n_bins)) {
    distinct.pop_back();  // every distinct value except the max is an edge
    return distinct;
  }
  std::vector<double> edges;
  const double n = static_cast<double>(sorted.size());
  std::size_t j = 0;
  for (int k = 1; k < n_bins; ++k) {
    const double target = n * static_cast<double>(k) / static_cast<double>(n_bins);
    while (j < d && static_cast<double>(cum[j]) < target) ++j;
    if (j >= d - 1) break;  // never cut at the max value
    if (edges.empty() || edges.back() != distinct[j]) edges.push_back(distinct[j]);
  }
  return edges;
}

std::uint32_t bin_of(const std::vector<double>& edges, double x) {
  const auto it = std::lower_bound(edges.begin(), edges.end(), x);
  return static_cast<std::uint32_t>(it - edges.begin());
}

struct SplitCandidate {
  double gain = 0.0;
  int feature = -1;
  int bin = -1;
  double threshold = 0.0;

  bool valid() const { return feature >= 0; }
};

struct NodeTask {
  int node = 0;
  std::size_t begin = 0;
  std::size_t end = 0;
  int depth = 0;
};

class TreeTrainer {
 public:
  TreeTrainer(const FeatureMatrix& m, const TrainConfig& cfg, int jobs)
      : matrix_(m), cfg_(cfg), jobs_(jobs) {
    columns_.resize(m.cols());
    parallel_for(m.cols(), jobs, [&](std::size_t f) {
      std::vector<double> values(m.rows());
      for (std::size_t r = 0; r < m.rows(); ++r) values[r] = m.at(r, f);
      columns_[f].edges = build_edges(values, cfg.n_bins);
      columns_[f].bins.resize(m.rows());
      for (std::size_t r = 0; r < m.rows(); ++r) {
        columns_[f].bins[r] = bin_of(columns_[f].edges, values[r]);
      }
    });
  }

  // One boosting round. Leaves fold in the learning rate and are added to
  // `margins` for the rows they cover.
  Tree grow_gbdt(std::span<const double> gradients, std::span<const double> hessians,
                 std::span<const std::size_t> features, std::vector<double>& margins) {
    std::vector<std::size_t> order(matrix_.rows());
    std::iota(order.begin(), order.end(), 0);

    Tree tree;
    std::vector<NodeTask> queue;
    {
      auto [g, h] = grad_sums(order, 0, order.size(), gradients, hessians);
      tree.nodes.push_back(make_gbdt_leaf(g, h, order.size()));
      queue.push_back({0, 0, order.size(), 0});
    }

    for (std::size_t q = 0; q < queue.size(); ++q) {
      const NodeTask task = queue[q];
      const std::size_t count = task.end - task.begin;

      SplitCandidate best;
      if (task.depth < cfg_.max_depth &&
          count >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf)) {
        auto [g, h] = grad_sums(order, task.begin, task.end, gradients, hessians);
        best = best_gbdt_split(order, task.begin, task.end, features, gradients, hessians, g, h);
      }

      if (!best.valid()) {
        const double value = tree.nodes[static_cast<std::size_t>(task.node)].value;
        for (std::size_t i = task.begin; i < task.end; ++i) {
          margins[order[i]] += value;
        }
        continue;
      }

      const std::size_t mid = partition_rows(order, task.begin, task.end, best);
      auto [gl, hl] = grad_sums(order, task.begin, mid, gradients, hessians);
      auto [gr, hr] = grad_sums(order, mid, task.end, gradients, hessians);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(make_gbdt_leaf(gl, hl, mid - task.begin));
      const int right = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(make_gbdt_leaf(gr, hr, task.end - mid));

      TreeNode& node = tree.nodes[static_cast<std::size_t>(task.node)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.gain = best.gain;
      node.value = 0.0;
      node.left = left;
      node.right = right;
      queue.push_back({left, task.begin, mid, task.depth + 1});
      queue.push_back({right, mid, task.end, task.depth + 1});
    }
    return tree;
  }

  // CART with Gini impurity; `rows` may repeat (bootstrap). When
  // `split_rng` is given, each split draws its own column subset.
  Tree grow_gini(std::vector<std::size_t> order, Rng* split_rng) {
    Tree tree;
    std::vector<NodeTask> queue;
    {
      auto [n0, n1] = class_counts(order, 0, order.size());
      tree.nodes.push_back(make_gini_leaf(n0, n1));
      queue.push_back({0, 0, order.size(), 0});
    }

    std::vector<std::size_t> all_features(matrix_.cols());
    std::iota(all_features.begin(), all_features.end(), 0);

    for (std::size_t q = 0; q < queue.size(); ++q) {
      const NodeTask task = queue[q];
      const std::size_t count = task.end - task.begin;

      SplitCandidate best;
      if (task.depth < cfg_.max_depth &&
          count >= 2 * static_cast<std::size_t>(cfg_.min_samples_leaf)) {
        std::vector<std::size_t> subset;
        std::span<const std::size_t> features(all_features);
        if (split_rng != nullptr && cfg_.colsample < 1.0) {
          const auto k = static_cast<std::size_t>(std::max(
              1.0, std::floor(cfg_.colsample * static_cast<double>(matrix_.cols()) + 0.5)));
          subset = split_rng->sample_without_replacement(matrix_.cols(), k);
          features = subset;
        }
        best = best_gini_split(order, task.begin, task.end, features);
      }

      if (!best.valid()) continue;

      const std::size_t mid = partition_rows(order, task.begin, task.end, best);
      auto [l0, l1] = class_counts(order, task.begin, mid);
      auto [r0, r1] = class_counts(order, mid, task.end);
      const int left = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(make_gini_leaf(l0, l1));
      const int right = static_cast<int>(tree.nodes.size());
      tree.nodes.push_back(make_gini_leaf(r0, r1));

      TreeNode& node = tree.nodes[static_cast<std::size_t>(task.node)];
      node.feature = best.feature;
      node.threshold = best.threshold;
      node.gain = best.gain;
      node.value = 0.0;
      node.left = left;
      node.right = right;
      queue.push_back({left, task.begin, mid, task.depth + 1});
      queue.push_back({right, mid, task.end, task.depth + 1});
    }
    return tree;
  }

 private:
  struct BinnedColumn {
    std::vector<double> edges;
    std::vector<std::uint32_t> bins;
  };

  double leaf_weight(double g, double h) const {
    const double denom = h + cfg_.reg_lambda;
    if (denom <= 0.0) return 0.0;
    return -soft_threshold(g, cfg_.reg_alpha) / denom;
  }

  double split_score(double g, double h) const {
    const double denom = h + cfg_.reg_lambda;
    if (denom <= 0.0) return 0.0;
    const double t = soft_threshold(g, cfg_.reg_alpha);
    return t * t / denom;
  }

  TreeNode make_gbdt_leaf(double g, double h, std::size_t count) const {
    TreeNode node;
    node.value = leaf_weight(g, h) * cfg_.learning_rate;
    node.cover = static_cast<double>(count);
    return node;
  }

  static TreeNode make_gini_leaf(std::int64_t n0, std::int64_t n1) {
    TreeNode node;
    const std::int64_t n = n0 + n1;
    node.value = n > 0 ? static_cast<double>(n1) / static_cast<double>(n) : 0.0;
    node.cover = static_cast<double>(n);
    return node;
  }

  std::pair<double, double> grad_sums(const std::vector<std::size_t>& order, std::size_t begin,
                                      std::size_t end, std::span<const double> g,
                                      std::span<const double> h) const {
    double sg = 0.0, sh = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      sg += g[order[i]];
      sh += h[order[i]];
    }
    return {sg, sh};
  }

  std::pair<std::int64_t, std::int64_t> class_counts(const std::vector<std::size_t>& order,
                                                     std::size_t begin, std::size_t end) const {
    std::int64_t n0 = 0, n1 = 0;
    for (std::size_t i = begin; i < end; ++i) {
      matrix_.labels[order[i]] == 1 ? ++n1 : ++n0;
    }
    return {n0, n1};
  }

  std::size_t partition_rows(std::vector<std::size_t>& order, std::size_t begin, std::size_t end,
                             const SplitCandidate& split) const {
    const auto& bins = columns_[static_cast<std::size_t>(split.feature)].bins;
    const auto cut = static_cast<std::uint32_t>(split.bin);
    const auto mid = std::stable_partition(
        order.begin() + static_cast<std::ptrdiff_t>(begin),
        order.begin() + static_cast<std::ptrdiff_t>(end),
        [&](std::size_t r) { return bins[r] <= cut; });
    return static_cast<std::size_t>(mid - order.begin());
  }

  // Best split by regularized second-order gain. Features are reduced in
  // ascending order and only strictly larger gains win, so ties resolve to
  // the lowest feature index, then the lowest threshold.
  SplitCandidate best_gbdt_split(const std::vector<std::size_t>& order, std::size_t begin,
                                 std::size_t end, std::span<const std::size_t> features,
                                 std::span<const double> g, std::span<const double> h,
                                 double total_g, double total_h) const {
    std::vector<SplitCandidate> per_feature(features.size());
    const auto total_count = static_cast<std::int64_t>(end - begin);
    const double parent = split_score(total_g, total_h);

    parallel_for(features.size(), jobs_, [&](std::size_t ci) {
      const std::size_t f = features[ci];
      const BinnedColumn& col = columns_[f];
      if (col.edges.empty()) return;
      const std::size_t n_bins = col.edges.size() + 1;
      std::vector<double> hg(n_bins, 0.0), hh(n_bins, 0.0);
      std::vector<std::int64_t> hc(n_bins, 0);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t r = order[i];
        const std::uint32_t b = col.bins[r];
        hg[b] += g[r];
        hh[b] += h[r];
        ++hc[b];
      }
      SplitCandidate best;
      double gl = 0.0, hl = 0.0;
      std::int64_t cl = 0;
      for (std::size_t b = 0; b + 1 < n_bins; ++b) {
        gl += hg[b];
        hl += hh[b];
        cl += hc[b];
        if (cl < cfg_.min_samples_leaf) continue;
        if (total_count - cl < cfg_.min_samples_leaf) break;
        const double gain =
            0.5 * (split_score(gl, hl) + split_score(total_g - gl, total_h - hl) - parent);
        if (gain > best.gain) {
          best = {gain, static_cast<int>(f), static_cast<int>(b), col.edges[b]};
        }
      }
      per_feature[ci] = best;
    });

    SplitCandidate best;
    for (const SplitCandidate& cand : per_feature) {
      if (cand.valid() && cand.gain > best.gain) best = cand;
    }
    return best;
  }

  SplitCandidate best_gini_split(const std::vector<std::size_t>& order, std::size_t begin,
                                 std::size_t end, std::span<const std::size_t> features) const {
    auto [n0, n1] = class_counts(order, begin, end);
    const auto total = static_cast<double>(n0 + n1);
    const auto gini = [](double a, double b) {
      const double n = a + b;
      if (n <= 0.0) return 0.0;
      return 1.0 - (a * a + b * b) / (n * n);
    };
    const double parent = gini(static_cast<double>(n0), static_cast<double>(n1));

    std::vector<SplitCandidate> per_feature(features.size());
    parallel_for(features.size(), jobs_, [&](std::size_t ci) {
      const std::size_t f = features[ci];
      const BinnedColumn& col = columns_[f];
      if (col.edges.empty()) return;
      const std::size_t n_bins = col.edges.size() + 1;
      std::vector<std::int64_t> h0(n_bins, 0), h1(n_bins, 0);
      for (std::size_t i = begin; i < end; ++i) {
        const std::size_t r = order[i];
        const std::uint32_t b = col.bins[r];
        matrix_.labels[r] == 1 ? ++h1[b] : ++h0[b];
      }
      SplitCandidate best;
      std::int64_t l0 = 0, l1 = 0;
      for (std::size_t b = 0; b + 1 < n_bins; ++b) {
        l0 += h0[b];
        l1 += h1[b];
        const std::int64_t left = l0 + l1;
        const std::int64_t right = (n0 + n1) - left;
        if (left < cfg_.min_samples_leaf) continue;
        if (right < cfg_.min_samples_leaf) break;
        const double wl = static_cast<double>(left) / total;
        const double wr = static_cast<double>(right) / total;
        const double gain =
            parent -
            wl * gini(static_cast<double>(l0), static_cast<double>(l1)) -
            wr * gini(static_cast<double>(n0 - l0), static_cast<double>(n1 - l1));
        if (gain > best.gain) {
          best = {gain, static_cast<int>(f), static_cast<int>(b), col.edges[b]};
        }
      }
      per_feature[ci] = best;
    });

    SplitCandidate best;
    for (const SplitCandidate& cand : per_feature) {
      if (cand.valid() && cand.gain > best.gain) best = cand;
    }
    return best;
  }

  const FeatureMatrix& matrix_;
  const TrainConfig& cfg_;
  int jobs_;
  std::vector<BinnedColumn> columns_;
};

Variant detect_variant(const std::vector<std::string>& names) {
  if (names == FeatureCatalog::d1().active) return Variant::D1;
  if (names == FeatureCatalog::d2().active) return Variant::D2;
  if (names == FeatureCatalog::d3().active) return Variant::D3;
  return Variant::Custom;
}

std::vector<std::size_t> gbdt_tree_columns(const TrainConfig& cfg, std::size_t n_features,
                                           int tree_index) {
  std::vector<std::size_t> columns(n_features);
  std::iota(columns.begin(), columns.end(), 0);
  if (cfg.colsample >= 1.0) return columns;
  const auto k = static_cast<std::size_t>(
      std::max(1.0, std::floor(cfg.colsample * static_cast<double>(n_features) + 0.5)));
  Rng rng(derive_seed(cfg.seed, 301 + static_cast<std::uint64_t>(tree_index)));
  return rng.sample_without_replacement(n_features, k);
}

void tally_split_counts(const Tree& tree, std::vector<std::int64_t>& counts) {
  for (const TreeNode& node : tree.nodes) {
    if (!node.is_leaf()) ++counts[static_cast<std::size_t>(node.feature)];
  }
}

}  // namespace

std::string_view model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::DecisionTree: return "decision_tree";
    case ModelKind::RandomForest: return "random_forest";
    case ModelKind::Gbdt: return "gbdt";
  }
  return "gbdt";
}

ModelKind model_kind_from_name(std::string_view name) {
  if (name == "decision_tree") return ModelKind::DecisionTree;
  if (name == "random_forest") return ModelKind::RandomForest;
  if (name == "gbdt") return ModelKind::Gbdt;
  throw Error("unknown model kind '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  if (n_estimators < 0) throw Error("config: n_estimators must be >= 0");
  if (max_depth < 0) throw Error("config: max_depth must be >= 0");
  if (!(learning_rate > 0.0)) throw Error("config: learning_rate must be positive");
  if (!(colsample > 0.0 && colsample <= 1.0)) throw Error("config: colsample must be in (0, 1]");
  if (reg_alpha < 0.0) throw Error("config: reg_alpha must be >= 0");
  if (reg_lambda < 0.0) throw Error("config: reg_lambda must be >= 0");
  if (min_samples_leaf < 1) throw Error("config: min_samples_leaf must be >= 1");
  if (n_bins < 2) throw Error("config: n_bins must be >= 2");
}

double Tree::predict(std::span<const double> row) const {
  int i = 0;
  while (!nodes[static_cast<std::size_t>(i)].is_leaf()) {
    const TreeNode& node = nodes[static_cast<std::size_t>(i)];
    i = row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
  }
  return nodes[static_cast<std::size_t>(i)].value;
}

int Tree::max_node_depth() const {
  if (nodes.empty()) return 0;
  int deepest = 0;
  std::vector<std::pair<int, int>> stack{{0, 0}};
  while (!stack.empty()) {
    auto [i, depth] = stack.back();
    stack.pop_back();
    deepest = std::max(deepest, depth);
    const TreeNode& node = nodes[static_cast<std::size_t>(i)];
    if (!node.is_leaf()) {
      stack.push_back({node.left, depth + 1});
      stack.push_back({node.right, depth + 1});
    }
  }
  return deepest;
}

double Model::predict_margin_row(std::span<const double> row) const {
  if (kind != ModelKind::Gbdt) throw Error("margins are defined for gbdt models only");
  double margin = base_score;
  for (const Tree& tree : trees) margin += tree.predict(row);
  return margin;
}

namespace {

void check_width(const Model& model, const FeatureMatrix& m) {
  if (m.cols() != model.n_features()) {
    throw Error("prediction width mismatch: model has " + std::to_string(model.n_features()) +
                " features, rows have " + std::to_string(m.cols()));
  }
  if (!m.feature_names.empty() && m.feature_names != model.catalog.active) {
    throw Error("prediction columns do not match the model catalog");
  }
}

}  // namespace

std::vector<double> Model::predict_margin(const FeatureMatrix& m) const {
  check_width(*this, m);
  std::vector<double> margins(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) margins[r] = predict_margin_row(m.row(r));
  return margins;
}

std::vector<double> Model::predict_proba(const FeatureMatrix& m, int n_trees_limit) const {
  check_width(*this, m);
  const std::size_t limit =
      n_trees_limit < 0 ? trees.size()
                        : std::min(trees.size(), static_cast<std::size_t>(n_trees_limit));
  std::vector<double> probs(m.rows(), 0.0);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const auto row = m.row(r);
    switch (kind) {
      case ModelKind::Gbdt: {
        double margin = base_score;
        for (std::size_t t = 0; t < limit; ++t) margin += trees[t].predict(row);
        probs[r] = sigmoid(margin);
        break;
      }
      case ModelKind::DecisionTree:
        probs[r] = trees.empty() ? 0.0 : trees[0].predict(row);
        break;
      case ModelKind::RandomForest: {
        double sum = 0.0;
        for (std::size_t t = 0; t < limit; ++t) sum += trees[t].predict(row);
        probs[r] = limit > 0 ? sum / static_cast<double>(limit) : 0.0;
        break;
      }
    }
  }
  return probs;
}

Model fit(const FeatureMatrix& m, const TrainConfig& cfg, int jobs) {
  cfg.validate();
  if (m.rows() == 0) throw Error("fit: empty matrix");
  if (m.labels.size() != m.rows()) throw Error("fit: labels missing");

  std::int64_t n_pos = 0;
  for (int label : m.labels) n_pos += label == 1 ? 1 : 0;
  const auto n = static_cast<std::int64_t>(m.rows());
  if (cfg.model_kind != ModelKind::DecisionTree && (n_pos == 0 || n_pos == n)) {
    throw Error("fit: degenerate labels, need both classes");
  }

  Model model;
  model.kind = cfg.model_kind;
  model.config = cfg;
  model.catalog.variant = detect_variant(m.feature_names);
  model.catalog.active = m.feature_names;
  model.split_counts.assign(m.cols(), 0);

  TreeTrainer trainer(m, cfg, jobs);

  switch (cfg.model_kind) {
    case ModelKind::Gbdt: {
      const double prior = static_cast<double>(n_pos) / static_cast<double>(n);
      model.base_score = std::log(prior / (1.0 - prior));
      std::vector<double> margins(m.rows(), model.base_score);
      std::vector<double> g(m.rows()), h(m.rows());
      for (int t = 0; t < cfg.n_estimators; ++t) {
        for (std::size_t i = 0; i < m.rows(); ++i) {
          const double p = sigmoid(margins[i]);
          g[i] = p - static_cast<double>(m.labels[i]);
          h[i] = p * (1.0 - p);
        }
        const auto columns = gbdt_tree_columns(cfg, m.cols(), t);
        Tree tree = trainer.grow_gbdt(g, h, columns, margins);
        tally_split_counts(tree, model.split_counts);
        model.trees.push_back(std::move(tree));
      }
      break;
    }
    case ModelKind::DecisionTree: {
      std::vector<std::size_t> order(m.rows());
      std::iota(order.begin(), order.end(), 0);
      Tree tree = trainer.grow_gini(std::move(order), nullptr);
      tally_split_counts(tree, model.split_counts);
      model.trees.push_back(std::move(tree));
      break;
    }
    case ModelKind::RandomForest: {
      if (cfg.n_estimators < 1) throw Error("fit: forest needs n_estimators >= 1");
      model.trees.resize(static_cast<std::size_t>(cfg.n_estimators));
      parallel_for(static_cast<std::size_t>(cfg.n_estimators), jobs, [&](std::size_t t) {
        Rng rng(derive_seed(cfg.seed, 5001 + t));
        std::vector<std::size_t> bootstrap(m.rows());
        for (std::size_t i = 0; i < m.rows(); ++i) {
          bootstrap[i] = static_cast<std::size_t>(rng.below(m.rows()));
        }
        model.trees[t] = trainer.grow_gini(std::move(bootstrap), &rng);
      });
      for (const Tree& tree : model.trees) tally_split_counts(tree, model.split_counts);
      break;
    }
  }
  return model;
}

std::vector<std::pair<std::string, std::int64_t>> split_count_importance(const Model& model) {
  std::vector<std::pair<std::string, std::int64_t>> ranked;
  ranked.reserve(model.catalog.active.size());
  for (std::size_t f = 0; f < model.catalog.active.size(); ++f) {
    ranked.emplace_back(model.catalog.active[f], model.split_counts[f]);
  }
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  return ranked;
}

namespace {

ordered_json node_to_json(const Tree& tree, int index, const std::vector<std::string>& names,
                          bool with_covers) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  ordered_json j;
  if (node.is_leaf()) {
    j["leaf"] = node.value;
  } else {
    j["feature"] = names[static_cast<std::size_t>(node.feature)];
    j["threshold"] = node.threshold;
    j["gain"] = node.gain;
    j["left"] = node_to_json(tree, node.left, names, with_covers);
    j["right"] = node_to_json(tree, node.right, names, with_covers);
  }
  if (with_covers) j["cover"] = node.cover;
  return j;
}

int node_from_json(const ordered_json& j, Tree& tree, const std::vector<std::string>& names,
                   bool& covers_ok) {
  const int index = static_cast<int>(tree.nodes.size());
  tree.nodes.emplace_back();
  if (j.contains("cover")) {
    tree.nodes.back().cover = j.at("cover").get<double>();
  } else {
    covers_ok = false;
  }
  if (j.contains("leaf")) {
    tree.nodes[static_cast<std::size_t>(index)].value = j.at("leaf").get<double>();
    return index;
  }
  const std::string feature = j.at("feature").get<std::string>();
  const auto it = std::find(names.begin(), names.end(), feature);
  if (it == names.end()) throw Error("model references unknown feature '" + feature + "'");
  tree.nodes[static_cast<std::size_t>(index)].feature = static_cast<int>(it - names.begin());
  tree.nodes[static_cast<std::size_t>(index)].threshold = j.at("threshold").get<double>();
  tree.nodes[static_cast<std::size_t>(index)].gain = j.value("gain", 0.0);
  const int left = node_from_json(j.at("left"), tree, names, covers_ok);
  tree.nodes[static_cast<std::size_t>(index)].left = left;
  const int right = node_from_json(j.at("right"), tree, names, covers_ok);
  tree.nodes[static_cast<std::size_t>(index)].right = right;
  return index;
}

}  // namespace

std::string model_to_json(const Model& model) {
  ordered_json j;
  j["format"] = "ponzi-lens-model";
  j["version"] = 1;
  j["kind"] = std::string(model_kind_name(model.kind));
  j["base_score"] = model.base_score;
  j["catalog"]["variant"] = std::string(variant_name(model.catalog.variant));
  j["catalog"]["features"] = model.catalog.active;
  j["config"] = train_config_to_json(model.config);
  j["trees"] = ordered_json::array();
  for (const Tree& tree : model.trees) {
    j["trees"].push_back(node_to_json(tree, 0, model.catalog.active, model.has_covers));
  }
  return j.dump(2) + "\n";
}

Model model_from_json(const std::string& text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const std::exception& e) {
    throw Error(std::string("bad model file: ") + e.what());
  }
  if (j.value("format", "") != "ponzi-lens-model") {
    throw Error("bad model file: missing format marker");
  }

  Model model;
  model.kind = model_kind_from_name(j.at("kind").get<std::string>());
  model.base_score = j.at("base_score").get<double>();
  std::vector<std::string> names = j.at("catalog").at("features").get<std::vector<std::string>>();
  const std::string variant = j.at("catalog").value("variant", "custom");
  model.catalog.active = names;
  model.catalog.variant = variant == "d1"   ? Variant::D1
                          : variant == "d2" ? Variant::D2
                          : variant == "d3" ? Variant::D3
                                            : Variant::Custom;
  model.config = train_config_from_json(j.at("config"));

  bool covers_ok = true;
  for (const ordered_json& tree_json : j.at("trees")) {
    Tree tree;
    node_from_json(tree_json, tree, names, covers_ok);
    model.trees.push_back(std::move(tree));
  }
  model.has_covers = covers_ok;
  model.split_counts.assign(names.size(), 0);
  for (const Tree& tree : model.trees) tally_split_counts(tree, model.split_counts);
  return model;
}

void save_model(const std::string& path, const Model& model) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << model_to_json(model);
  if (!out) throw Error("write failed for " + path);
}

Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return model_from_json(buffer.str());
}

}  // namespace ponzilens
