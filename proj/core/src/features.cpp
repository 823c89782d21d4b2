#include "ponzilens/features.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>

#include "ponzilens/csv.hpp"
#include "ponzilens/parallel.hpp"

namespace ponzilens {

namespace {

constexpr std::int64_t kSecondsPerDay = 86400;

constexpr std::array<std::string_view, kFeatureCount> kFeatureNames = {
    "balance",
    "lifetime",
    "tx_in",
    "tx_out",
    "investment_in",
    "payment_out",
    "n_addr_paying",
    "n_addr_paid",
    "mean_v1",
    "mean_v2",
    "sdev_v1",
    "sdev_v2",
    "paid_rate",
    "paid_one",
    "known_rate",
    "n_maxpayment",
    "skew_v1",
    "skew_v2",
    "inv_in_over_tx_in",
    "pay_out_over_tx_out",
    "pct_days_tx_in",
    "sdev_tx_in",
    "pct_days_tx_out",
    "sdev_tx_out",
    "initiator_eth_wo_investing",
    "initiator_eth_investing",
    "initiator_no_eth",
};

constexpr std::array<std::string_view, 13> kD2Names = {
    "balance",   "investment_in", "payment_out",  "mean_v1", "mean_v2",
    "sdev_v1",   "sdev_v2",       "paid_rate",    "paid_one", "known_rate",
    "n_maxpayment", "skew_v1",    "skew_v2",
};

constexpr std::array<std::string_view, 3> kD3Removed = {
    "payment_out", "initiator_eth_investing", "initiator_no_eth"};

// Everything extract_features needs about one counterparty.
struct AddressTally {
  std::int64_t count_in = 0;
  std::int64_t count_out = 0;
  double eth_in = 0.0;
  double eth_out = 0.0;
  std::int64_t paying_count = 0;   // value-bearing In
  std::int64_t payment_count = 0;  // value-bearing Out
  std::int64_t first_paying_ts = std::numeric_limits<std::int64_t>::max();
  std::int64_t first_payment_ts = std::numeric_limits<std::int64_t>::max();
};

std::map<AddressId, AddressTally> tally_addresses(const ContractHistory& h) {
  std::map<AddressId, AddressTally> tally;
  for (const Transaction& tx : h.transactions) {
    AddressTally& t = tally[tx.counterparty];
    if (tx.direction == Direction::In) {
      ++t.count_in;
      t.eth_in += wei_to_eth(tx.value);
      if (tx.value > 0) {
        ++t.paying_count;
        t.first_paying_ts = std::min(t.first_paying_ts, tx.timestamp);
      }
    } else {
      ++t.count_out;
      t.eth_out += wei_to_eth(tx.value);
      if (tx.value > 0) {
        ++t.payment_count;
        t.first_payment_ts = std::min(t.first_payment_ts, tx.timestamp);
      }
    }
  }
  return tally;
}

struct Moments {
  double mean = 0.0;
  double sdev = 0.0;
  double skew = 0.0;
};

// Population moments; skewness of constant data (or fewer than 3 points) is 0.
Moments population_moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  const double n = static_cast<double>(xs.size());
  for (double x : xs) m.mean += x;
  m.mean /= n;
  double m2 = 0.0;
  double m3 = 0.0;
  for (double x : xs) {
    const double d = x - m.mean;
    m2 += d * d;
    m3 += d * d * d;
  }
  m2 /= n;
  m3 /= n;
  m.sdev = std::sqrt(m2);
  if (m2 > 0.0 && xs.size() >= 3) m.skew = m3 / std::pow(m2, 1.5);
  return m;
}

// Population sdev of per-day counts over span_days days, inactive days count 0.
double daily_count_sdev(const std::map<std::int64_t, std::int64_t>& day_counts,
                        std::int64_t total, std::int64_t span_days) {
  if (span_days <= 0) return 0.0;
  const double span = static_cast<double>(span_days);
  const double mean = static_cast<double>(total) / span;
  double sum_sq = 0.0;
  for (const auto& [day, count] : day_counts) {
    sum_sq += static_cast<double>(count) * static_cast<double>(count);
  }
  const double variance = sum_sq / span - mean * mean;
  return variance > 0.0 ? std::sqrt(variance) : 0.0;
}

}  // namespace

const std::array<std::string_view, kFeatureCount>& feature_names() {
  return kFeatureNames;
}

int feature_index(std::string_view name) {
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (kFeatureNames[i] == name) return static_cast<int>(i);
  }
  return -1;
}

double FeatureVector::at(std::string_view name) const {
  const int i = feature_index(name);
  if (i < 0) throw Error("unknown feature '" + std::string(name) + "'");
  return values[static_cast<std::size_t>(i)];
}

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::D1: return "d1";
    case Variant::D2: return "d2";
    case Variant::D3: return "d3";
    case Variant::Custom: return "custom";
  }
  return "custom";
}

FeatureCatalog FeatureCatalog::d1() {
  FeatureCatalog cat;
  cat.variant = Variant::D1;
  cat.active.assign(kFeatureNames.begin(), kFeatureNames.end());
  return cat;
}

FeatureCatalog FeatureCatalog::d2() {
  FeatureCatalog cat;
  cat.variant = Variant::D2;
  cat.active.assign(kD2Names.begin(), kD2Names.end());
  return cat;
}

FeatureCatalog FeatureCatalog::d3() {
  FeatureCatalog cat;
  cat.variant = Variant::D3;
  for (std::string_view name : kFeatureNames) {
    if (std::find(kD3Removed.begin(), kD3Removed.end(), name) == kD3Removed.end()) {
      cat.active.emplace_back(name);
    }
  }
  return cat;
}

FeatureCatalog FeatureCatalog::custom(std::vector<std::string> names) {
  if (names.empty()) throw Error("custom catalog must list at least one feature");
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (feature_index(names[i]) < 0) {
      throw Error("unknown feature '" + names[i] + "' in custom catalog");
    }
    for (std::size_t j = i + 1; j < names.size(); ++j) {
      if (names[i] == names[j]) throw Error("duplicate feature '" + names[i] + "' in custom catalog");
    }
  }
  FeatureCatalog cat;
  cat.variant = Variant::Custom;
  cat.active = std::move(names);
  return cat;
}

std::vector<std::size_t> FeatureCatalog::catalog_indices() const {
  std::vector<std::size_t> indices;
  indices.reserve(active.size());
  for (const std::string& name : active) {
    indices.push_back(static_cast<std::size_t>(feature_index(name)));
  }
  return indices;
}

std::map<AddressId, AddressFlows> per_address_flows(const ContractHistory& h) {
  std::map<AddressId, AddressFlows> flows;
  for (const auto& [address, t] : tally_addresses(h)) {
    flows[address] = AddressFlows{t.count_in, t.count_out, t.eth_in, t.eth_out};
  }
  return flows;
}

FeatureVector extract_features(const ContractHistory& h) {
  FeatureVector fv;

  std::int64_t tx_in = 0, tx_out = 0, investment_in = 0, payment_out = 0;
  __int128 wei_in = 0, wei_out = 0;
  std::int64_t min_ts = std::numeric_limits<std::int64_t>::max();
  std::int64_t max_ts = std::numeric_limits<std::int64_t>::min();
  std::map<std::int64_t, std::int64_t> in_day_counts, out_day_counts;

  for (const Transaction& tx : h.transactions) {
    min_ts = std::min(min_ts, tx.timestamp);
    max_ts = std::max(max_ts, tx.timestamp);
    const std::int64_t day = tx.timestamp / kSecondsPerDay;
    if (tx.direction == Direction::In) {
      ++tx_in;
      wei_in += static_cast<__int128>(tx.value);
      if (tx.value > 0) ++investment_in;
      ++in_day_counts[day];
    } else {
      ++tx_out;
      wei_out += static_cast<__int128>(tx.value);
      if (tx.value > 0) ++payment_out;
      ++out_day_counts[day];
    }
  }

  const auto tally = tally_addresses(h);

  std::int64_t n_addr_paying = 0, n_addr_paid = 0;
  std::int64_t investors = 0, investors_paid_many = 0;
  std::int64_t payees = 0, payees_known = 0;
  std::int64_t max_payments = 0;
  std::vector<double> d1, d2;
  d1.reserve(tally.size());
  d2.reserve(tally.size());
  for (const auto& [address, t] : tally) {
    d1.push_back(static_cast<double>(t.count_in - t.count_out));
    d2.push_back(t.eth_in - t.eth_out);
    if (t.paying_count > 0) {
      ++n_addr_paying;
      ++investors;
      if (t.payment_count >= 2) ++investors_paid_many;
    }
    if (t.payment_count > 0) {
      ++n_addr_paid;
      ++payees;
      // Strict inequality: an investment at the same timestamp as the first
      // payment does not count as "before".
      if (t.paying_count > 0 && t.first_paying_ts < t.first_payment_ts) ++payees_known;
    }
    max_payments = std::max(max_payments, t.payment_count);
  }

  const Moments m1 = population_moments(d1);
  const Moments m2 = population_moments(d2);

  const bool has_tx = !h.transactions.empty();
  const std::int64_t lifetime = has_tx ? max_ts - min_ts : 0;
  const std::int64_t span_days =
      has_tx ? max_ts / kSecondsPerDay - min_ts / kSecondsPerDay + 1 : 0;

  bool creator_invested = false, creator_earned = false;
  if (!h.creator.empty()) {
    if (const auto it = tally.find(h.creator); it != tally.end()) {
      creator_invested = it->second.paying_count > 0;
      creator_earned = it->second.payment_count > 0;
    }
  }

  auto f = [&fv](std::string_view name) -> double& {
    return fv.values[static_cast<std::size_t>(feature_index(name))];
  };

  f("balance") = static_cast<double>(static_cast<long double>(wei_in - wei_out) / 1e18L);
  f("lifetime") = static_cast<double>(lifetime);
  f("tx_in") = static_cast<double>(tx_in);
  f("tx_out") = static_cast<double>(tx_out);
  f("investment_in") = static_cast<double>(investment_in);
  f("payment_out") = static_cast<double>(payment_out);
  f("n_addr_paying") = static_cast<double>(n_addr_paying);
  f("n_addr_paid") = static_cast<double>(n_addr_paid);
  f("mean_v1") = m1.mean;
  f("mean_v2") = m2.mean;
  f("sdev_v1") = m1.sdev;
  f("sdev_v2") = m2.sdev;
  f("paid_rate") = tx_out > 0 ? static_cast<double>(tx_in) / static_cast<double>(tx_out) : 0.0;
  f("paid_one") =
      investors > 0 ? static_cast<double>(investors_paid_many) / static_cast<double>(investors)
                    : 0.0;
  f("known_rate") =
      payees > 0 ? static_cast<double>(payees_known) / static_cast<double>(payees) : 0.0;
  f("n_maxpayment") = static_cast<double>(max_payments);
  f("skew_v1") = m1.skew;
  f("skew_v2") = m2.skew;
  f("inv_in_over_tx_in") =
      tx_in > 0 ? static_cast<double>(investment_in) / static_cast<double>(tx_in) : 0.0;
  f("pay_out_over_tx_out") =
      tx_out > 0 ? static_cast<double>(payment_out) / static_cast<double>(tx_out) : 0.0;
  f("pct_days_tx_in") =
      span_days > 0 ? static_cast<double>(in_day_counts.size()) / static_cast<double>(span_days)
                    : 0.0;
  f("sdev_tx_in") = daily_count_sdev(in_day_counts, tx_in, span_days);
  f("pct_days_tx_out") =
      span_days > 0 ? static_cast<double>(out_day_counts.size()) / static_cast<double>(span_days)
                    : 0.0;
  f("sdev_tx_out") = daily_count_sdev(out_day_counts, tx_out, span_days);
  f("initiator_eth_wo_investing") = creator_earned && !creator_invested ? 1.0 : 0.0;
  f("initiator_eth_investing") = creator_earned && creator_invested ? 1.0 : 0.0;
  f("initiator_no_eth") = creator_earned ? 0.0 : 1.0;

  return fv;
}

int FeatureMatrix::column_index(std::string_view name) const {
  for (std::size_t i = 0; i < feature_names.size(); ++i) {
    if (feature_names[i] == name) return static_cast<int>(i);
  }
  return -1;
}

FeatureMatrix FeatureMatrix::select_rows(std::span<const std::size_t> indices) const {
  FeatureMatrix out;
  out.feature_names = feature_names;
  out.addresses.reserve(indices.size());
  out.labels.reserve(indices.size());
  out.values.reserve(indices.size() * cols());
  for (std::size_t r : indices) {
    out.addresses.push_back(addresses[r]);
    out.labels.push_back(labels[r]);
    const auto row_span = row(r);
    out.values.insert(out.values.end(), row_span.begin(), row_span.end());
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(const std::vector<std::string>& names) const {
  std::vector<std::size_t> cols_idx;
  cols_idx.reserve(names.size());
  for (const std::string& name : names) {
    const int c = column_index(name);
    if (c < 0) throw Error("feature '" + name + "' not present in matrix");
    cols_idx.push_back(static_cast<std::size_t>(c));
  }
  FeatureMatrix out;
  out.feature_names = names;
  out.addresses = addresses;
  out.labels = labels;
  out.values.reserve(rows() * names.size());
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t c : cols_idx) out.values.push_back(at(r, c));
  }
  return out;
}

FeatureMatrix build_feature_matrix(const LabeledDataset& ds, const FeatureCatalog& cat,
                                   int jobs) {
  const auto indices = cat.catalog_indices();
  FeatureMatrix m;
  m.feature_names = cat.active;
  m.addresses.resize(ds.contracts.size());
  m.labels.resize(ds.contracts.size());
  m.values.resize(ds.contracts.size() * indices.size());

  parallel_for(ds.contracts.size(), jobs, [&](std::size_t r) {
    const ContractHistory& contract = ds.contracts[r];
    const FeatureVector fv = extract_features(contract);
    m.addresses[r] = contract.address.str();
    m.labels[r] = contract.label == Label::Ponzi ? 1 : 0;
    double* row = m.values.data() + r * indices.size();
    for (std::size_t c = 0; c < indices.size(); ++c) row[c] = fv.values[indices[c]];
  });
  return m;
}

void save_feature_matrix(const std::string& path, const FeatureMatrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "address";
  for (const std::string& name : m.feature_names) out << ',' << name;
  out << ",label\n";
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out << m.addresses[r];
    for (std::size_t c = 0; c < m.cols(); ++c) out << ',' << format_double(m.at(r, c), 9);
    out << ',' << m.labels[r] << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

FeatureMatrix load_feature_matrix(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);

  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(path + ": empty file, expected header");
  ++line_no;

  auto header = split_csv_line(line);
  if (header.size() < 3 || header.front() != "address" || header.back() != "label") {
    throw Error(path + ":1: expected header address,<features>,label");
  }
  FeatureMatrix m;
  for (std::size_t i = 1; i + 1 < header.size(); ++i) {
    const std::string name(header[i]);
    if (feature_index(name) < 0) throw Error(path + ":1: unknown feature column '" + name + "'");
    m.feature_names.push_back(name);
  }

  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != m.cols() + 2) {
      throw Error(path + ":" + std::to_string(line_no) + ": expected " +
                  std::to_string(m.cols() + 2) + " fields, got " + std::to_string(fields.size()));
    }
    m.addresses.emplace_back(fields.front());
    for (std::size_t c = 1; c + 1 < fields.size(); ++c) {
      double v = 0.0;
      const auto field = fields[c];
      const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (ec != std::errc{} || ptr != field.data() + field.size()) {
        throw Error(path + ":" + std::to_string(line_no) + ": bad number '" + std::string(field) +
                    "'");
      }
      m.values.push_back(v);
    }
    if (fields.back() == "0") {
      m.labels.push_back(0);
    } else if (fields.back() == "1") {
      m.labels.push_back(1);
    } else {
      throw Error(path + ":" + std::to_string(line_no) + ": bad label '" +
                  std::string(fields.back()) + "'");
    }
  }
  return m;
}

namespace {

bool is_initiator_flag(std::string_view feature) {
  return feature == "initiator_eth_wo_investing" || feature == "initiator_eth_investing" ||
         feature == "initiator_no_eth";
}

double linear_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return 0.0;
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(h);
  const double frac = h - static_cast<double>(lo);
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

std::vector<DistributionRow> emit_distribution_data(const FeatureMatrix& m,
                                                    std::string_view feature) {
  const int col = m.column_index(feature);
  if (col < 0) throw Error("unknown feature '" + std::string(feature) + "'");

  std::vector<DistributionRow> rows;
  for (int label : {1, 0}) {
    std::vector<double> xs;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (m.labels[r] == label) xs.push_back(m.at(r, static_cast<std::size_t>(col)));
    }
    if (xs.empty()) continue;

    if (is_initiator_flag(feature)) {
      for (double value : {0.0, 1.0}) {
        const auto count = std::count(xs.begin(), xs.end(), value);
        rows.push_back({std::string(feature), label, value,
                        static_cast<double>(count) / static_cast<double>(xs.size())});
      }
      continue;
    }

    std::sort(xs.begin(), xs.end());
    const double lo = linear_quantile(xs, 0.01);
    const double hi = linear_quantile(xs, 0.99);
    std::vector<double> kept;
    for (double x : xs) {
      if (x >= lo && x <= hi) kept.push_back(x);
    }
    const double n = static_cast<double>(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) {
      if (i + 1 < kept.size() && kept[i + 1] == kept[i]) continue;  // last of a run
      rows.push_back({std::string(feature), label, kept[i], static_cast<double>(i + 1) / n});
    }
  }
  return rows;
}

void save_distribution_rows(const std::string& path, const std::vector<DistributionRow>& rows) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << "feature,class,value,cum_fraction\n";
  for (const DistributionRow& row : rows) {
    out << row.feature << ',' << (row.label == 1 ? "ponzi" : "not_ponzi") << ','
        << format_double(row.value) << ',' << format_double(row.fraction) << '\n';
  }
  if (!out) throw Error("write failed for " + path);
}

}  // namespace ponzilens
