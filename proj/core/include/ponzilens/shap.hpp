#pragma once

#include <span>
#include <string>
#include <vector>

#include "ponzilens/trees.hpp"

namespace ponzilens {

// Per-row, per-feature attributions in margin (log-odds) space.
// base_value + sum(phi[row]) equals the model margin of the row.
struct ShapMatrix {
  std::size_t n_rows = 0;
  std::size_t n_features = 0;
  std::vector<double> phi;  // row-major
  double base_value = 0.0;

  double at(std::size_t r, std::size_t f) const { return phi[r * n_features + f]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(phi.data() + r * n_features, n_features);
  }
};

// Exact Shapley values of the tree-path-dependent game: out-of-coalition
// features are marginalized by cover-weighted descent, coalition features
// follow the row. Summed across trees; needs fit-time cover counts.
ShapMatrix tree_shap(const Model& model, const FeatureMatrix& rows, int jobs = 1);

// Expected margin over the training distribution implied by the covers;
// equals ShapMatrix::base_value.
double expected_margin(const Model& model);

// Validation oracle: 2^n coalition enumeration of the same game.
// Rejects models with more than 12 features.
std::vector<double> brute_force_shapley(const Model& model, std::span<const double> row);

struct ShapSummaryEntry {
  std::string feature;
  double mean_abs_phi = 0.0;
};

// Features ranked by mean absolute attribution, ties keep catalog order.
std::vector<ShapSummaryEntry> shap_summary(const ShapMatrix& sm, const FeatureMatrix& m);

struct DependenceRow {
  std::string address;
  double feature_value = 0.0;
  double phi = 0.0;
  double interaction_value = 0.0;
};

// Scatter triples for a (feature, interaction feature) pair, row order
// preserved. Self-interaction duplicates the feature value.
std::vector<DependenceRow> dependence_data(const ShapMatrix& sm, const FeatureMatrix& m,
                                           std::string_view feature,
                                           std::string_view interaction_feature);

}  // namespace ponzilens
