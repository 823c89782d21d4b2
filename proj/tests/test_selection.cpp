#include "ponzilens/selection.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ponzilens/json_io.hpp"
#include "ponzilens/rng.hpp"
#include "test_util.hpp"

using namespace ponzilens;

namespace {

GridSpec single_candidate_grid() {
  GridSpec grid;
  grid.model_kinds = {ModelKind::Gbdt};
  grid.n_estimators = {10};
  grid.max_depth = {3};
  grid.learning_rate = {0.2};
  grid.colsample = {1.0};
  grid.reg_alpha = {0.0};
  grid.reg_lambda = {1.0};
  return grid;
}

// Labels depend on a three-way interaction, far beyond a depth-1 stump.
FeatureMatrix interaction_matrix(std::size_t rows, std::uint64_t seed) {
  Rng rng(seed);
  return test_util::random_matrix(rng, rows, 4, [](const std::vector<double>& row) {
    const int parity = (row[0] > 0.5) + (row[1] > 0.5) + (row[2] > 0.5);
    return parity % 2 == 1;
  });
}

std::string search_fingerprint(const SearchResult& result) {
  return search_result_to_json(result).dump();
}

}  // namespace

TEST_CASE("grid enumeration: kinds project onto the parameters they use") {
  GridSpec grid;
  grid.model_kinds = {ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Gbdt};
  grid.n_estimators = {10, 20};
  grid.max_depth = {2, 4};
  grid.learning_rate = {0.1, 0.2};
  grid.colsample = {0.5, 1.0};
  grid.reg_alpha = {0.0};
  grid.reg_lambda = {1.0, 10.0};

  const auto candidates = grid.enumerate(1);
  // tree: 2 depths; forest: 2*2*2; gbdt: 2*2*2*2*1*2
  CHECK(candidates.size() == 2 + 8 + 32);

  std::set<std::uint64_t> seeds;
  for (const TrainConfig& cfg : candidates) seeds.insert(cfg.seed);
  CHECK(seeds.size() == candidates.size());  // distinct derived seeds

  // Deterministic order: the first block is the plain tree sweep.
  CHECK(candidates[0].model_kind == ModelKind::DecisionTree);
  CHECK(candidates[0].max_depth == 2);
  CHECK(candidates[1].max_depth == 4);
}

TEST_CASE("default grid contains the published winning configurations") {
  const auto candidates = GridSpec::default_grid().enumerate(0);
  const auto contains = [&](int est, int depth, double lr, double cs, double a, double l) {
    return std::any_of(candidates.begin(), candidates.end(), [&](const TrainConfig& cfg) {
      return cfg.model_kind == ModelKind::Gbdt && cfg.n_estimators == est &&
             cfg.max_depth == depth && cfg.learning_rate == lr && cfg.colsample == cs &&
             cfg.reg_alpha == a && cfg.reg_lambda == l;
    });
  };
  CHECK(contains(80, 20, 0.1, 0.8, 0.2, 1.0));    // full-set winner
  CHECK(contains(100, 15, 0.1, 0.5, 0.1, 10.0));  // prior-work-set winner
  CHECK(contains(120, 15, 0.1, 0.5, 0.1, 10.0));  // reduced-set winner
}

TEST_CASE("grid file parsing") {
  const auto dir = test_util::fresh_temp_dir("grid");
  test_util::write_file(dir / "grid.json",
                        R"({"model_kinds": ["gbdt"], "n_estimators": [5],
                            "max_depth": [2], "learning_rate": [0.3],
                            "colsample": [1.0], "reg_alpha": [0.0], "reg_lambda": [1.0]})");
  const GridSpec grid = GridSpec::from_json_file((dir / "grid.json").string());
  CHECK(grid.enumerate(0).size() == 1);
  CHECK(grid.n_estimators == std::vector<int>{5});

  test_util::write_file(dir / "bad.json", "{");
  CHECK_THROWS_AS(GridSpec::from_json_file((dir / "bad.json").string()), Error);
  test_util::write_file(dir / "empty.json", R"({"n_estimators": []})");
  CHECK_THROWS_AS(GridSpec::from_json_file((dir / "empty.json").string()), Error);
}

TEST_CASE("single-candidate search wins with the mean of its fold AUCs") {
  Rng rng(5);
  const FeatureMatrix m = test_util::random_matrix(
      rng, 120, 4, [](const std::vector<double>& row) { return row[0] > 0.45; });

  const SearchResult result = grid_search_cv(m, single_candidate_grid(), 5, 42);
  REQUIRE(result.candidates.size() == 1);
  CHECK(result.best_index == 0);
  const CandidateResult& cand = result.candidates[0];
  REQUIRE(cand.fold_aucs.size() == 5);
  double mean = 0.0;
  for (double auc : cand.fold_aucs) mean += auc;
  mean /= 5.0;
  CHECK(result.best_mean_auc == doctest::Approx(mean).epsilon(1e-15));
  CHECK(result.best_model.kind == ModelKind::Gbdt);
  CHECK(result.best_model.catalog.active == m.feature_names);
}

TEST_CASE("a depth-crippled candidate loses every fold on interaction data") {
  const FeatureMatrix m = interaction_matrix(600, 17);
  GridSpec grid = single_candidate_grid();
  grid.n_estimators = {60};
  grid.max_depth = {1, 4};  // stump vs deep enough for the parity interaction

  const SearchResult result = grid_search_cv(m, grid, 5, 7);
  REQUIRE(result.candidates.size() == 2);
  const CandidateResult& stump = result.candidates[0];
  const CandidateResult& deep = result.candidates[1];
  for (std::size_t f = 0; f < stump.fold_aucs.size(); ++f) {
    CHECK(deep.fold_aucs[f] > stump.fold_aucs[f]);
  }
  CHECK(result.best_index == 1);
  CHECK(result.candidates[result.best_index].config.max_depth == 4);
}

TEST_CASE("search results are deterministic and thread-count independent") {
  Rng rng(6);
  const FeatureMatrix m = test_util::random_matrix(
      rng, 150, 5, [](const std::vector<double>& row) { return row[1] > 0.5; });
  GridSpec grid = single_candidate_grid();
  grid.max_depth = {2, 3};
  grid.learning_rate = {0.1, 0.2};

  const SearchResult a = grid_search_cv(m, grid, 4, 99, 1);
  const SearchResult b = grid_search_cv(m, grid, 4, 99, 8);
  CHECK(search_fingerprint(a) == search_fingerprint(b));
  CHECK(model_to_json(a.best_model) == model_to_json(b.best_model));
}

TEST_CASE("failing candidates are excluded; an all-failed grid throws") {
  Rng rng(8);
  const FeatureMatrix m = test_util::random_matrix(
      rng, 80, 3, [](const std::vector<double>& row) { return row[0] > 0.5; });

  GridSpec grid = single_candidate_grid();
  grid.model_kinds = {ModelKind::RandomForest, ModelKind::Gbdt};
  grid.n_estimators = {0};  // forests cannot train with zero trees
  const SearchResult result = grid_search_cv(m, grid, 4, 3);
  REQUIRE(result.candidates.size() == 2);
  CHECK(result.candidates[0].failed);
  CHECK(!result.candidates[0].failure.empty());
  CHECK(!result.candidates[1].failed);
  CHECK(result.best_index == 1);

  GridSpec doomed = single_candidate_grid();
  doomed.model_kinds = {ModelKind::RandomForest};
  doomed.n_estimators = {0};
  CHECK_THROWS_AS(grid_search_cv(m, doomed, 4, 3), Error);
}

TEST_CASE("rfe: floor at the current width is a single step") {
  Rng rng(9);
  const FeatureMatrix m = test_util::random_matrix(
      rng, 100, 4, [](const std::vector<double>& row) { return row[0] > 0.5; });
  const RfeTrace trace =
      recursive_feature_elimination(m, single_candidate_grid(), 4, 1, m.cols());
  REQUIRE(trace.steps.size() == 1);
  CHECK(trace.steps[0].active == m.feature_names);
  CHECK(trace.steps[0].removed.empty());
  CHECK(trace.winner == 0);
  CHECK(trace.winning_catalog().active.size() == 4);

  CHECK_THROWS_AS(recursive_feature_elimination(m, single_candidate_grid(), 4, 1, 0), Error);
  CHECK_THROWS_AS(recursive_feature_elimination(m, single_candidate_grid(), 4, 1, 5), Error);
}

TEST_CASE("rfe eliminates pure-noise features before informative ones") {
  // Three informative coordinates and five noise ones; the label is a
  // threshold function of the informative block only.
  Rng rng(10);
  FeatureMatrix m = test_util::random_matrix(rng, 500, 8, [](const std::vector<double>& row) {
    return row[0] + row[1] + row[2] > 1.5;
  });
  // Use real catalog names so the matrix survives CSV round trips elsewhere;
  // informative ones first.
  m.feature_names = {"balance", "lifetime", "tx_in", "tx_out",
                     "paid_rate", "paid_one", "known_rate", "skew_v1"};

  GridSpec grid = single_candidate_grid();
  grid.n_estimators = {40};
  grid.max_depth = {4};

  const RfeTrace trace = recursive_feature_elimination(m, grid, 4, 21, 3);
  REQUIRE(trace.steps.size() == 6);  // 8 features down to 3

  const std::set<std::string> informative = {"balance", "lifetime", "tx_in"};
  for (std::size_t i = 0; i + 1 < trace.steps.size(); ++i) {
    CHECK(informative.count(trace.steps[i].removed) == 0);
  }
  CHECK(trace.steps.back().active == std::vector<std::string>{"balance", "lifetime", "tx_in"});

  // Each step removes exactly one feature from the previous active set.
  for (std::size_t i = 1; i < trace.steps.size(); ++i) {
    const auto& prev = trace.steps[i - 1].active;
    const auto& curr = trace.steps[i].active;
    CHECK(curr.size() + 1 == prev.size());
    for (const std::string& name : curr) {
      CHECK(std::find(prev.begin(), prev.end(), name) != prev.end());
    }
  }

  // The winner attains the maximum mean AUC.
  for (const RfeStep& step : trace.steps) {
    CHECK(trace.steps[trace.winner].mean_cv_auc >= step.mean_cv_auc);
  }
}
