#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ponzilens/chain.hpp"

namespace ponzilens {

// Learnable features in fixed catalog order. The contract address is an
// identifier only and never enters a matrix.
inline constexpr std::size_t kFeatureCount = 27;

const std::array<std::string_view, kFeatureCount>& feature_names();
int feature_index(std::string_view name);  // -1 when unknown

struct FeatureVector {
  std::array<double, kFeatureCount> values{};

  double operator[](std::size_t i) const { return values[i]; }
  double at(std::string_view name) const;
};

enum class Variant { D1, D2, D3, Custom };

std::string_view variant_name(Variant v);

// An ordered projection of the feature catalog. D1 is the full set, D2 the
// prior-work set, D3 the full set minus payment_out and the two initiator
// flags dropped by feature elimination.
struct FeatureCatalog {
  Variant variant = Variant::D1;
  std::vector<std::string> active;

  static FeatureCatalog d1();
  static FeatureCatalog d2();
  static FeatureCatalog d3();
  static FeatureCatalog custom(std::vector<std::string> names);  // validates

  std::size_t size() const { return active.size(); }
  std::vector<std::size_t> catalog_indices() const;
};

// Per-counterparty transaction and value tallies (both directions).
struct AddressFlows {
  std::int64_t count_in = 0;
  std::int64_t count_out = 0;
  double eth_in = 0.0;
  double eth_out = 0.0;
};

std::map<AddressId, AddressFlows> per_address_flows(const ContractHistory& h);

// All 27 features of one contract. Total on any history, including empty
// ones: ratios with zero denominators resolve to 0.
FeatureVector extract_features(const ContractHistory& h);

struct FeatureMatrix {
  std::vector<std::string> feature_names;  // column order
  std::vector<std::string> addresses;      // one per row
  std::vector<int> labels;                 // 0 = not-Ponzi, 1 = Ponzi
  std::vector<double> values;              // row-major

  std::size_t rows() const { return addresses.size(); }
  std::size_t cols() const { return feature_names.size(); }
  double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(values.data() + r * cols(), cols());
  }
  int column_index(std::string_view name) const;  // -1 when absent

  FeatureMatrix select_rows(std::span<const std::size_t> indices) const;
  FeatureMatrix select_columns(const std::vector<std::string>& names) const;
};

// Rows in dataset order regardless of worker scheduling.
FeatureMatrix build_feature_matrix(const LabeledDataset& ds, const FeatureCatalog& cat,
                                   int jobs = 1);

// features.csv: `address,<feature names>,label`, 9 significant digits.
void save_feature_matrix(const std::string& path, const FeatureMatrix& m);
FeatureMatrix load_feature_matrix(const std::string& path);

// One plot-data row: per-class empirical CDF point for continuous features,
// per-class value share for the binary initiator flags.
struct DistributionRow {
  std::string feature;
  int label = 0;
  double value = 0.0;
  double fraction = 0.0;
};

// CDF points carry 1st/99th percentile trimming; the three initiator flags
// are emitted as value shares instead.
std::vector<DistributionRow> emit_distribution_data(const FeatureMatrix& m,
                                                    std::string_view feature);

// distribution CSV: `feature,class,value,cum_fraction`.
void save_distribution_rows(const std::string& path, const std::vector<DistributionRow>& rows);

}  // namespace ponzilens
