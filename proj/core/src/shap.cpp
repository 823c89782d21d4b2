#include "ponzilens/shap.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <numeric>

#include "ponzilens/parallel.hpp"

namespace ponzilens {

namespace {

// factorial table in long double; path-distinct feature counts stay well
// below the 170! overflow point.
long double factorial(int n) {
  static const auto table = [] {
    std::array<long double, 171> t{};
    t[0] = 1.0L;
    for (int i = 1; i <= 170; ++i) t[i] = t[i - 1] * static_cast<long double>(i);
    return t;
  }();
  return table[static_cast<std::size_t>(n)];
}

// Shapley kernel weight for a coalition of size k among n players.
double shapley_weight(int k, int n) {
  return static_cast<double>(factorial(k) * factorial(n - 1 - k) / factorial(n));
}

void check_explainable(const Model& model) {
  if (model.kind != ModelKind::Gbdt) {
    throw Error("tree_shap expects a gbdt model (margin space)");
  }
  if (!model.has_covers) {
    throw Error("explainability requires fit-time covers");
  }
}

// One multiplicative factor per distinct feature on a root-to-leaf path:
// `hot` is 1 when the row satisfies every decision on that feature, `cold`
// is the product of cover fractions over those decisions.
struct PathFactor {
  int feature = -1;
  double hot = 0.0;
  double cold = 0.0;
};

using Poly = std::vector<double>;  // coefficients, ascending degree

Poly poly_multiply_linear(const Poly& p, double c0, double c1) {
  Poly out(p.size() + 1, 0.0);
  for (std::size_t i = 0; i < p.size(); ++i) {
    out[i] += p[i] * c0;
    out[i + 1] += p[i] * c1;
  }
  return out;
}

// Walks every path of one tree and accumulates the leaf's Shapley
// contributions. The conditional-expectation game factorizes per leaf into a
// product over the path's distinct features: hot when the feature is in the
// coalition, cold otherwise. The Shapley sum over coalitions then reduces to
// coefficient sums of the product polynomial with one factor left out.
class TreeWalker {
 public:
  TreeWalker(const Tree& tree, std::span<const double> row, std::span<double> phi)
      : tree_(tree), row_(row), phi_(phi) {}

  void walk() { descend(0); }

 private:
  void descend(int index) {
    const TreeNode& node = tree_.nodes[static_cast<std::size_t>(index)];
    if (node.is_leaf()) {
      settle_leaf(node.value);
      return;
    }
    if (node.cover <= 0.0) throw Error("tree_shap: non-positive cover on an internal node");

    const bool go_left = row_[static_cast<std::size_t>(node.feature)] <= node.threshold;
    const double left_frac =
        tree_.nodes[static_cast<std::size_t>(node.left)].cover / node.cover;
    const double right_frac =
        tree_.nodes[static_cast<std::size_t>(node.right)].cover / node.cover;

    push_and_descend(node.left, node.feature, go_left ? 1.0 : 0.0, left_frac);
    push_and_descend(node.right, node.feature, go_left ? 0.0 : 1.0, right_frac);
  }

  void push_and_descend(int child, int feature, double hot, double cold) {
    // Index, not iterator: the recursion below may grow factors_.
    std::size_t i = 0;
    while (i < factors_.size() && factors_[i].feature != feature) ++i;
    if (i < factors_.size()) {
      const PathFactor saved = factors_[i];
      factors_[i].hot *= hot;
      factors_[i].cold *= cold;
      descend(child);
      factors_[i] = saved;
    } else {
      factors_.push_back({feature, hot, cold});
      descend(child);
      factors_.pop_back();
    }
  }

  void settle_leaf(double leaf_value) {
    const int n = static_cast<int>(factors_.size());
    if (n == 0) return;  // contributes to the base value only

    // prefix[i] = product of factors [0, i), suffix[i] = product of [i, n).
    std::vector<Poly> prefix(static_cast<std::size_t>(n) + 1);
    std::vector<Poly> suffix(static_cast<std::size_t>(n) + 1);
    prefix[0] = {1.0};
    for (int i = 0; i < n; ++i) {
      prefix[i + 1] = poly_multiply_linear(prefix[i], factors_[i].cold, factors_[i].hot);
    }
    suffix[static_cast<std::size_t>(n)] = {1.0};
    for (int i = n - 1; i >= 0; --i) {
      suffix[i] = poly_multiply_linear(suffix[i + 1], factors_[i].cold, factors_[i].hot);
    }

    for (int j = 0; j < n; ++j) {
      const Poly& left = prefix[j];
      const Poly& right = suffix[j + 1];
      // others[k] = sum over coalitions of size k (excluding feature j) of
      // prod(hot in coalition) * prod(cold outside).
      Poly others(static_cast<std::size_t>(n), 0.0);
      for (std::size_t a = 0; a < left.size(); ++a) {
        for (std::size_t b = 0; b < right.size(); ++b) {
          others[a + b] += left[a] * right[b];
        }
      }
      double contribution = 0.0;
      for (int k = 0; k < n; ++k) {
        contribution += others[static_cast<std::size_t>(k)] * shapley_weight(k, n);
      }
      phi_[static_cast<std::size_t>(factors_[j].feature)] +=
          leaf_value * (factors_[j].hot - factors_[j].cold) * contribution;
    }
  }

  const Tree& tree_;
  std::span<const double> row_;
  std::span<double> phi_;
  std::vector<PathFactor> factors_;
};

double tree_base_value(const Tree& tree) {
  // Covers telescope: sum of leaf * cover / root cover.
  const double root_cover = tree.nodes.empty() ? 0.0 : tree.nodes[0].cover;
  if (tree.nodes.size() == 1) return tree.nodes[0].value;
  if (root_cover <= 0.0) throw Error("tree_shap: non-positive root cover");
  double sum = 0.0;
  for (const TreeNode& node : tree.nodes) {
    if (node.is_leaf()) sum += node.value * node.cover;
  }
  return sum / root_cover;
}

}  // namespace

double expected_margin(const Model& model) {
  check_explainable(model);
  double base = model.base_score;
  for (const Tree& tree : model.trees) base += tree_base_value(tree);
  return base;
}

ShapMatrix tree_shap(const Model& model, const FeatureMatrix& rows, int jobs) {
  check_explainable(model);
  if (rows.cols() != model.n_features()) {
    throw Error("tree_shap: row width does not match the model catalog");
  }

  ShapMatrix sm;
  sm.n_rows = rows.rows();
  sm.n_features = model.n_features();
  sm.phi.assign(sm.n_rows * sm.n_features, 0.0);
  sm.base_value = expected_margin(model);

  parallel_for(rows.rows(), jobs, [&](std::size_t r) {
    std::span<double> phi(sm.phi.data() + r * sm.n_features, sm.n_features);
    for (const Tree& tree : model.trees) {
      TreeWalker walker(tree, rows.row(r), phi);
      walker.walk();
    }
  });
  return sm;
}

namespace {

// Conditional expectation of one tree under coalition S (bitmask):
// in-coalition features follow the row, the rest average by cover.
double tree_coalition_value(const Tree& tree, int index, std::span<const double> row,
                            std::uint32_t coalition) {
  const TreeNode& node = tree.nodes[static_cast<std::size_t>(index)];
  if (node.is_leaf()) return node.value;
  if (coalition & (1u << static_cast<unsigned>(node.feature))) {
    const int next =
        row[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right;
    return tree_coalition_value(tree, next, row, coalition);
  }
  if (node.cover <= 0.0) throw Error("brute_force_shapley: non-positive cover");
  const TreeNode& left = tree.nodes[static_cast<std::size_t>(node.left)];
  const TreeNode& right = tree.nodes[static_cast<std::size_t>(node.right)];
  return (tree_coalition_value(tree, node.left, row, coalition) * left.cover +
          tree_coalition_value(tree, node.right, row, coalition) * right.cover) /
         node.cover;
}

}  // namespace

std::vector<double> brute_force_shapley(const Model& model, std::span<const double> row) {
  check_explainable(model);
  const std::size_t m = model.n_features();
  if (m > 12) throw Error("brute_force_shapley: too many features (limit 12)");
  if (row.size() != m) throw Error("brute_force_shapley: row width mismatch");

  const auto value_of = [&](std::uint32_t coalition) {
    double v = 0.0;
    for (const Tree& tree : model.trees) {
      v += tree_coalition_value(tree, 0, row, coalition);
    }
    return v;
  };

  std::vector<double> phi(m, 0.0);
  const auto full = static_cast<std::uint32_t>((1u << m) - 1);
  for (std::uint32_t coalition = 0; coalition <= full; ++coalition) {
    const int size = std::popcount(coalition);
    const double v = value_of(coalition);
    for (std::size_t i = 0; i < m; ++i) {
      const std::uint32_t bit = 1u << i;
      if (coalition & bit) continue;
      const double w = shapley_weight(size, static_cast<int>(m));
      phi[i] += w * (value_of(coalition | bit) - v);
    }
  }
  return phi;
}

std::vector<ShapSummaryEntry> shap_summary(const ShapMatrix& sm, const FeatureMatrix& m) {
  if (sm.n_features != m.cols() || sm.n_rows != m.rows()) {
    throw Error("shap_summary: shapes disagree");
  }
  std::vector<ShapSummaryEntry> entries;
  entries.reserve(sm.n_features);
  for (std::size_t f = 0; f < sm.n_features; ++f) {
    double sum = 0.0;
    for (std::size_t r = 0; r < sm.n_rows; ++r) sum += std::abs(sm.at(r, f));
    entries.push_back(
        {m.feature_names[f], sm.n_rows > 0 ? sum / static_cast<double>(sm.n_rows) : 0.0});
  }
  std::stable_sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return a.mean_abs_phi > b.mean_abs_phi;
  });
  return entries;
}

std::vector<DependenceRow> dependence_data(const ShapMatrix& sm, const FeatureMatrix& m,
                                           std::string_view feature,
                                           std::string_view interaction_feature) {
  if (sm.n_features != m.cols() || sm.n_rows != m.rows()) {
    throw Error("dependence_data: shapes disagree");
  }
  const int f = m.column_index(feature);
  if (f < 0) throw Error("unknown feature '" + std::string(feature) + "'");
  const int g = m.column_index(interaction_feature);
  if (g < 0) throw Error("unknown feature '" + std::string(interaction_feature) + "'");

  std::vector<DependenceRow> rows;
  rows.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    rows.push_back({m.addresses[r], m.at(r, static_cast<std::size_t>(f)),
                    sm.at(r, static_cast<std::size_t>(f)), m.at(r, static_cast<std::size_t>(g))});
  }
  return rows;
}

}  // namespace ponzilens
