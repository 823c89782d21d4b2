#include "ponzilens/selection.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "ponzilens/parallel.hpp"
#include "ponzilens/rng.hpp"

namespace ponzilens {

GridSpec GridSpec::default_grid() {
  GridSpec grid;
  grid.model_kinds = {ModelKind::DecisionTree, ModelKind::RandomForest, ModelKind::Gbdt};
  grid.n_estimators = {50, 80, 100, 120};
  grid.max_depth = {5, 10, 15, 20};
  grid.learning_rate = {0.05, 0.1};
  grid.colsample = {0.5, 0.8, 1.0};
  grid.reg_alpha = {0.0, 0.1, 0.2};
  grid.reg_lambda = {1.0, 10.0};
  return grid;
}

GridSpec GridSpec::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw Error(path + ": bad grid file: " + e.what());
  }

  GridSpec grid = default_grid();
  if (j.contains("model_kinds")) {
    grid.model_kinds.clear();
    for (const auto& name : j.at("model_kinds")) {
      grid.model_kinds.push_back(model_kind_from_name(name.get<std::string>()));
    }
  }
  if (j.contains("n_estimators")) grid.n_estimators = j.at("n_estimators").get<std::vector<int>>();
  if (j.contains("max_depth")) grid.max_depth = j.at("max_depth").get<std::vector<int>>();
  if (j.contains("learning_rate")) {
    grid.learning_rate = j.at("learning_rate").get<std::vector<double>>();
  }
  if (j.contains("colsample")) grid.colsample = j.at("colsample").get<std::vector<double>>();
  if (j.contains("reg_alpha")) grid.reg_alpha = j.at("reg_alpha").get<std::vector<double>>();
  if (j.contains("reg_lambda")) grid.reg_lambda = j.at("reg_lambda").get<std::vector<double>>();
  grid.validate();
  return grid;
}

void GridSpec::validate() const {
  if (model_kinds.empty() || n_estimators.empty() || max_depth.empty() ||
      learning_rate.empty() || colsample.empty() || reg_alpha.empty() || reg_lambda.empty()) {
    throw Error("grid: every hyper-parameter list must be non-empty");
  }
}

std::vector<TrainConfig> GridSpec::enumerate(std::uint64_t master_seed) const {
  validate();
  std::vector<TrainConfig> candidates;
  for (ModelKind kind : model_kinds) {
    const bool ensemble = kind != ModelKind::DecisionTree;
    const bool boosted = kind == ModelKind::Gbdt;
    const std::size_t n_est = ensemble ? n_estimators.size() : 1;
    const std::size_t n_lr = boosted ? learning_rate.size() : 1;
    const std::size_t n_col = ensemble ? colsample.size() : 1;
    const std::size_t n_alpha = boosted ? reg_alpha.size() : 1;
    const std::size_t n_lambda = boosted ? reg_lambda.size() : 1;
    for (std::size_t e = 0; e < n_est; ++e) {
      for (std::size_t d = 0; d < max_depth.size(); ++d) {
        for (std::size_t lr = 0; lr < n_lr; ++lr) {
          for (std::size_t cs = 0; cs < n_col; ++cs) {
            for (std::size_t a = 0; a < n_alpha; ++a) {
              for (std::size_t l = 0; l < n_lambda; ++l) {
                TrainConfig cfg;
                cfg.model_kind = kind;
                cfg.n_estimators = n_estimators[e];
                cfg.max_depth = max_depth[d];
                cfg.learning_rate = learning_rate[lr];
                cfg.colsample = colsample[cs];
                cfg.reg_alpha = reg_alpha[a];
                cfg.reg_lambda = reg_lambda[l];
                candidates.push_back(cfg);
              }
            }
          }
        }
      }
    }
  }
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    candidates[i].seed = derive_seed(master_seed, 40000 + i);
  }
  return candidates;
}

SearchResult grid_search_cv(const FeatureMatrix& train, const GridSpec& grid, int k,
                            std::uint64_t seed, int jobs) {
  const std::vector<TrainConfig> candidates = grid.enumerate(seed);
  if (candidates.empty()) throw Error("grid_search_cv: empty grid");

  const auto folds = stratified_kfold(train.labels, k, seed);

  // Fold train/validation matrices are shared by every candidate.
  std::vector<FeatureMatrix> fold_train, fold_valid;
  for (const auto& fold : folds) {
    std::vector<std::size_t> rest;
    std::vector<bool> in_fold(train.rows(), false);
    for (std::size_t i : fold) in_fold[i] = true;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      if (!in_fold[i]) rest.push_back(i);
    }
    fold_train.push_back(train.select_rows(rest));
    fold_valid.push_back(train.select_rows(fold));
  }

  SearchResult result;
  result.candidates.resize(candidates.size());
  parallel_for(candidates.size(), jobs, [&](std::size_t ci) {
    CandidateResult& cand = result.candidates[ci];
    cand.config = candidates[ci];
    try {
      double sum = 0.0;
      for (std::size_t f = 0; f < folds.size(); ++f) {
        const Model model = fit(fold_train[f], cand.config, 1);
        const auto probs = model.predict_proba(fold_valid[f]);
        const double auc = auc_score(fold_valid[f].labels, probs);
        cand.fold_aucs.push_back(auc);
        sum += auc;
      }
      cand.mean_auc = sum / static_cast<double>(folds.size());
    } catch (const std::exception& e) {
      cand.failed = true;
      cand.failure = e.what();
      cand.fold_aucs.clear();
      cand.mean_auc = -std::numeric_limits<double>::infinity();
    }
  });

  bool any_ok = false;
  for (std::size_t ci = 0; ci < result.candidates.size(); ++ci) {
    const CandidateResult& cand = result.candidates[ci];
    if (cand.failed) continue;
    if (!any_ok || cand.mean_auc > result.best_mean_auc) {
      any_ok = true;
      result.best_index = ci;
      result.best_mean_auc = cand.mean_auc;
    }
  }
  if (!any_ok) throw Error("grid_search_cv: every candidate failed to train");

  result.best_model = fit(train, result.candidates[result.best_index].config, jobs);
  return result;
}

FeatureCatalog RfeTrace::winning_catalog() const {
  // Not FeatureCatalog::custom: traces may carry non-catalog column names
  // when elimination ran on a caller-provided matrix.
  FeatureCatalog catalog;
  catalog.variant = Variant::Custom;
  catalog.active = steps[winner].active;
  return catalog;
}

RfeTrace recursive_feature_elimination(const FeatureMatrix& full, const GridSpec& grid, int k,
                                       std::uint64_t seed, std::size_t floor_features,
                                       int jobs) {
  if (floor_features < 1) throw Error("rfe: floor must be >= 1");
  if (floor_features > full.cols()) {
    throw Error("rfe: floor exceeds the current feature count");
  }

  RfeTrace trace;
  std::vector<std::string> active = full.feature_names;
  while (true) {
    const FeatureMatrix matrix =
        active == full.feature_names ? full : full.select_columns(active);
    const SearchResult search = grid_search_cv(matrix, grid, k, seed, jobs);

    RfeStep step;
    step.active = active;
    step.best_config = search.candidates[search.best_index].config;
    step.mean_cv_auc = search.best_mean_auc;

    if (active.size() == floor_features) {
      trace.steps.push_back(std::move(step));
      break;
    }

    // Lowest split count loses; the importance table is stable on catalog
    // order, so back() drops the later-listed feature among ties.
    const auto ranked = split_count_importance(search.best_model);
    step.removed = ranked.back().first;
    active.erase(std::find(active.begin(), active.end(), step.removed));
    trace.steps.push_back(std::move(step));
  }

  trace.winner = 0;
  for (std::size_t i = 1; i < trace.steps.size(); ++i) {
    if (trace.steps[i].mean_cv_auc > trace.steps[trace.winner].mean_cv_auc) trace.winner = i;
  }
  return trace;
}

}  // namespace ponzilens
