#include <benchmark/benchmark.h>

#include <vector>

#include "ponzilens/features.hpp"
#include "ponzilens/metrics.hpp"
#include "ponzilens/rng.hpp"
#include "ponzilens/shap.hpp"
#include "ponzilens/trees.hpp"

namespace {

using namespace ponzilens;

ContractHistory synthetic_history(Rng& rng, unsigned tag, std::size_t n_txs) {
  ContractHistory h;
  char buf[48];
  std::snprintf(buf, sizeof(buf), "0x%040x", tag + 1);
  h.address = AddressId::parse(buf);
  std::snprintf(buf, sizeof(buf), "0x%040x", tag + 1000000);
  h.creator = AddressId::parse(buf);
  std::vector<AddressId> pool;
  for (unsigned p = 0; p < 12; ++p) {
    std::snprintf(buf, sizeof(buf), "0x%040x", 2000000 + 16 * tag + p);
    pool.push_back(AddressId::parse(buf));
  }
  for (std::size_t i = 0; i < n_txs; ++i) {
    Transaction tx;
    tx.timestamp = static_cast<std::int64_t>(rng.below(40000000));
    tx.direction = rng.below(2) == 0 ? Direction::In : Direction::Out;
    tx.counterparty = pool[rng.below(pool.size())];
    tx.value = Wei{rng.below(100)} * Wei{10000000000000000ULL};
    h.transactions.push_back(tx);
  }
  std::stable_sort(h.transactions.begin(), h.transactions.end(),
                   [](const Transaction& a, const Transaction& b) {
                     return a.timestamp < b.timestamp;
                   });
  return h;
}

FeatureMatrix synthetic_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix m;
  for (std::size_t c = 0; c < cols; ++c) m.feature_names.push_back("f" + std::to_string(c));
  for (std::size_t r = 0; r < rows; ++r) {
    m.addresses.push_back("0x" + std::string(40, 'a'));
    std::vector<double> row(cols);
    for (double& v : row) v = rng.uniform01();
    m.labels.push_back(row[0] + 0.4 * row[1] > 0.7 ? 1 : 0);
    m.values.insert(m.values.end(), row.begin(), row.end());
  }
  return m;
}

void BM_ExtractFeatures(benchmark::State& state) {
  Rng rng(1);
  const ContractHistory h =
      synthetic_history(rng, 0, static_cast<std::size_t>(state.range(0)));
  for (auto _ : state) {
    benchmark::DoNotOptimize(extract_features(h));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ExtractFeatures)->Arg(100)->Arg(1000)->Arg(10000);

void BM_FitGbdt(benchmark::State& state) {
  const FeatureMatrix m = synthetic_matrix(static_cast<std::size_t>(state.range(0)), 27, 7);
  TrainConfig cfg;
  cfg.n_estimators = 40;
  cfg.max_depth = 6;
  cfg.colsample = 0.8;
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit(m, cfg));
  }
}
BENCHMARK(BM_FitGbdt)->Arg(500)->Arg(2000)->Unit(benchmark::kMillisecond);

void BM_TreeShap(benchmark::State& state) {
  const FeatureMatrix m = synthetic_matrix(1000, 16, 11);
  TrainConfig cfg;
  cfg.n_estimators = static_cast<int>(state.range(0));
  cfg.max_depth = 6;
  const Model model = fit(m, cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(tree_shap(model, m));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(m.rows()));
}
BENCHMARK(BM_TreeShap)->Arg(20)->Arg(60)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
