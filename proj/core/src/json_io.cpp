#include "ponzilens/json_io.hpp"

namespace ponzilens {

using ordered_json = nlohmann::ordered_json;

ordered_json train_config_to_json(const TrainConfig& cfg) {
  ordered_json j;
  j["model_kind"] = std::string(model_kind_name(cfg.model_kind));
  j["n_estimators"] = cfg.n_estimators;
  j["max_depth"] = cfg.max_depth;
  j["learning_rate"] = cfg.learning_rate;
  j["colsample"] = cfg.colsample;
  j["reg_alpha"] = cfg.reg_alpha;
  j["reg_lambda"] = cfg.reg_lambda;
  j["min_samples_leaf"] = cfg.min_samples_leaf;
  j["n_bins"] = cfg.n_bins;
  j["seed"] = cfg.seed;
  return j;
}

TrainConfig train_config_from_json(const ordered_json& j) {
  TrainConfig cfg;
  cfg.model_kind = model_kind_from_name(j.at("model_kind").get<std::string>());
  cfg.n_estimators = j.at("n_estimators").get<int>();
  cfg.max_depth = j.at("max_depth").get<int>();
  cfg.learning_rate = j.at("learning_rate").get<double>();
  cfg.colsample = j.at("colsample").get<double>();
  cfg.reg_alpha = j.at("reg_alpha").get<double>();
  cfg.reg_lambda = j.at("reg_lambda").get<double>();
  cfg.min_samples_leaf = j.at("min_samples_leaf").get<int>();
  cfg.n_bins = j.at("n_bins").get<int>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

ordered_json metric_report_to_json(const MetricReport& report) {
  ordered_json j;
  j["accuracy"] = report.accuracy;
  j["auc"] = report.auc;
  j["f1"] = report.f1;
  j["precision"] = report.precision;
  j["recall"] = report.recall;
  return j;
}

ordered_json confusion_to_json(const ConfusionMatrix& cm) {
  ordered_json j;
  j["tn"] = cm.tn;
  j["fp"] = cm.fp;
  j["fn"] = cm.fn;
  j["tp"] = cm.tp;
  return j;
}

ordered_json mcnemar_to_json(const McNemarResult& result) {
  ordered_json j;
  j["b"] = result.b;
  j["c"] = result.c;
  j["p_exact"] = result.p_exact;
  j["p_chi2_cc"] = result.p_chi2_cc;
  j["degenerate"] = result.degenerate;
  return j;
}

ordered_json search_result_to_json(const SearchResult& result) {
  ordered_json j;
  j["best_index"] = result.best_index;
  j["best_mean_auc"] = result.best_mean_auc;
  j["candidates"] = ordered_json::array();
  for (const CandidateResult& cand : result.candidates) {
    ordered_json c;
    c["config"] = train_config_to_json(cand.config);
    c["fold_aucs"] = cand.fold_aucs;
    c["mean_auc"] = cand.failed ? ordered_json() : ordered_json(cand.mean_auc);
    c["failed"] = cand.failed;
    if (cand.failed) c["failure"] = cand.failure;
    j["candidates"].push_back(std::move(c));
  }
  return j;
}

ordered_json rfe_trace_to_json(const RfeTrace& trace) {
  ordered_json j;
  j["winner"] = trace.winner;
  j["steps"] = ordered_json::array();
  for (const RfeStep& step : trace.steps) {
    ordered_json s;
    s["n_features"] = step.active.size();
    s["active"] = step.active;
    s["best_config"] = train_config_to_json(step.best_config);
    s["mean_cv_auc"] = step.mean_cv_auc;
    s["removed"] = step.removed;
    j["steps"].push_back(std::move(s));
  }
  return j;
}

}  // namespace ponzilens
