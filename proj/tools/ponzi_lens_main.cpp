// ponzi-lens: transaction-history featurization, tree-ensemble training with
// cross-validated grid search, feature elimination, evaluation reports, and
// SHAP explanation data, driven entirely by flat files and a seed.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "ponzilens/csv.hpp"
#include "ponzilens/features.hpp"
#include "ponzilens/json_io.hpp"
#include "ponzilens/metrics.hpp"
#include "ponzilens/selection.hpp"
#include "ponzilens/shap.hpp"
#include "ponzilens/trees.hpp"
#include "ponzilens/version.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;
using namespace ponzilens;

constexpr double kLocalAccuracyTolerance = 1e-8;

std::uint64_t env_seed_or(std::uint64_t fallback) {
  if (const char* env = std::getenv("PONZI_LENS_SEED")) {
    return std::strtoull(env, nullptr, 10);
  }
  return fallback;
}

FeatureCatalog parse_variant(const std::string& text) {
  if (text == "d1") return FeatureCatalog::d1();
  if (text == "d2") return FeatureCatalog::d2();
  if (text == "d3") return FeatureCatalog::d3();
  if (text.rfind("custom:", 0) == 0) {
    const std::string path = text.substr(7);
    std::ifstream in(path);
    if (!in) throw Error("cannot open catalog file " + path);
    ordered_json j;
    in >> j;
    return FeatureCatalog::custom(j.at("features").get<std::vector<std::string>>());
  }
  throw Error("bad --variant '" + text + "', expected d1, d2, d3 or custom:<file>");
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed for " + path.string());
}

void write_json(const fs::path& path, const ordered_json& j) {
  write_text(path, j.dump(2) + "\n");
}

// Every command pairs its outputs with a manifest naming the exact inputs.
// The wall clock lives only here, so the data files stay byte-identical
// across reruns.
class ManifestWriter {
 public:
  ManifestWriter(std::string command, fs::path out_dir)
      : start_(std::chrono::steady_clock::now()), out_dir_(std::move(out_dir)) {
    manifest_["tool"] = "ponzi-lens";
    manifest_["version"] = kVersion;
    manifest_["command"] = std::move(command);
    fs::create_directories(out_dir_);
  }

  ordered_json& fields() { return manifest_; }

  void add_input(const std::string& key, const std::string& path) {
    manifest_["inputs"][key] = path;
  }
  void add_output(const std::string& name) { manifest_["outputs"].push_back(name); }

  void finish() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    manifest_["duration_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(elapsed).count();
    write_json(out_dir_ / "manifest.json", manifest_);
  }

 private:
  std::chrono::steady_clock::time_point start_;
  fs::path out_dir_;
  ordered_json manifest_;
};

struct CommonOptions {
  std::string out_dir;
  std::uint64_t seed = 0;
  int jobs = 1;
  int folds = 5;
  double test_fraction = 0.2;
  double threshold = 0.5;
  std::string grid_file;
};

GridSpec load_grid(const CommonOptions& opts) {
  return opts.grid_file.empty() ? GridSpec::default_grid()
                                : GridSpec::from_json_file(opts.grid_file);
}

ordered_json split_summary(const SplitPlan& plan, const FeatureMatrix& m) {
  std::size_t test_pos = 0;
  for (std::size_t i : plan.test_indices) test_pos += m.labels[i] == 1 ? 1 : 0;
  ordered_json j;
  j["train_rows"] = plan.train_indices.size();
  j["test_rows"] = plan.test_indices.size();
  j["test_positives"] = test_pos;
  return j;
}

int cmd_featurize(const std::string& transactions, const std::string& labels,
                  const std::string& variant, bool distributions, const CommonOptions& opts) {
  ManifestWriter manifest("featurize", opts.out_dir);
  manifest.add_input("transactions", transactions);
  manifest.add_input("labels", labels);
  manifest.fields()["variant"] = variant;

  const FeatureCatalog catalog = parse_variant(variant);
  const HistoryMap histories = load_transactions(transactions);
  const LabeledDataset dataset = load_labels(labels, histories);
  const FeatureMatrix matrix = build_feature_matrix(dataset, catalog, opts.jobs);

  const fs::path out(opts.out_dir);
  save_feature_matrix((out / "features.csv").string(), matrix);
  manifest.add_output("features.csv");

  if (distributions) {
    std::vector<DistributionRow> rows;
    for (const std::string& name : matrix.feature_names) {
      const auto feature_rows = emit_distribution_data(matrix, name);
      rows.insert(rows.end(), feature_rows.begin(), feature_rows.end());
    }
    save_distribution_rows((out / "distributions.csv").string(), rows);
    manifest.add_output("distributions.csv");
  }

  manifest.fields()["contracts"] = dataset.contracts.size();
  manifest.fields()["class_counts"] = {dataset.n_ponzi, dataset.n_not_ponzi};
  manifest.fields()["unlabeled_dropped"] = dataset.n_unlabeled_dropped;
  manifest.finish();

  std::cout << "featurize: " << matrix.rows() << " contracts, " << matrix.cols()
            << " features (" << dataset.n_ponzi << " ponzi / " << dataset.n_not_ponzi
            << " not), " << dataset.n_unlabeled_dropped << " unlabeled dropped\n";
  return 0;
}

int cmd_train(const std::string& features, const CommonOptions& opts) {
  ManifestWriter manifest("train", opts.out_dir);
  manifest.add_input("features", features);
  if (!opts.grid_file.empty()) manifest.add_input("grid", opts.grid_file);
  manifest.fields()["seed"] = opts.seed;

  const FeatureMatrix matrix = load_feature_matrix(features);
  const GridSpec grid = load_grid(opts);
  const SplitPlan plan = stratified_split(matrix.labels, opts.test_fraction, opts.seed);
  const FeatureMatrix train_matrix = matrix.select_rows(plan.train_indices);
  const FeatureMatrix test_matrix = matrix.select_rows(plan.test_indices);

  const SearchResult search = grid_search_cv(train_matrix, grid, opts.folds, opts.seed, opts.jobs);
  const Model& model = search.best_model;

  const auto probs = model.predict_proba(test_matrix);
  const ConfusionMatrix cm = confusion(test_matrix.labels, probs, opts.threshold);
  const MetricReport metrics = compute_metrics(cm, test_matrix.labels, probs);

  const fs::path out(opts.out_dir);
  save_model((out / "model.json").string(), model);
  manifest.add_output("model.json");

  ordered_json report;
  report["dataset_variant"] = std::string(variant_name(model.catalog.variant));
  report["classifier"] = std::string(model_kind_name(model.kind));
  report["config"] = train_config_to_json(model.config);
  report["metrics"] = metric_report_to_json(metrics);
  report["confusion"] = confusion_to_json(cm);
  report["threshold"] = opts.threshold;
  report["seed"] = opts.seed;
  report["split"] = split_summary(plan, matrix);
  report["roc_points"] = ordered_json::array();
  for (const RocPoint& p : roc_points(test_matrix.labels, probs)) {
    report["roc_points"].push_back({p.fpr, p.tpr, p.threshold});
  }
  write_json(out / "report.json", report);
  manifest.add_output("report.json");

  ordered_json selection = search_result_to_json(search);
  selection["folds"] = opts.folds;
  selection["seed"] = opts.seed;
  write_json(out / "selection_report.json", selection);
  manifest.add_output("selection_report.json");
  manifest.finish();

  std::cout << "train: " << model_kind_name(model.kind) << " wins with mean CV AUC "
            << format_double(search.best_mean_auc, 6) << "; test AUC "
            << format_double(metrics.auc, 6) << ", accuracy "
            << format_double(metrics.accuracy, 6) << "\n";
  return 0;
}

int cmd_rfe(const std::string& features, std::size_t floor_features, const CommonOptions& opts) {
  ManifestWriter manifest("rfe", opts.out_dir);
  manifest.add_input("features", features);
  if (!opts.grid_file.empty()) manifest.add_input("grid", opts.grid_file);
  manifest.fields()["seed"] = opts.seed;
  manifest.fields()["floor"] = floor_features;

  const FeatureMatrix matrix = load_feature_matrix(features);
  const GridSpec grid = load_grid(opts);
  const SplitPlan plan = stratified_split(matrix.labels, opts.test_fraction, opts.seed);
  const FeatureMatrix train_matrix = matrix.select_rows(plan.train_indices);

  const RfeTrace trace = recursive_feature_elimination(train_matrix, grid, opts.folds, opts.seed,
                                                       floor_features, opts.jobs);

  const fs::path out(opts.out_dir);
  ordered_json report = rfe_trace_to_json(trace);
  report["seed"] = opts.seed;
  report["folds"] = opts.folds;
  write_json(out / "rfe_report.json", report);
  manifest.add_output("rfe_report.json");

  ordered_json catalog;
  catalog["name"] = "rfe_winner";
  catalog["features"] = trace.steps[trace.winner].active;
  write_json(out / "rfe_catalog.json", catalog);
  manifest.add_output("rfe_catalog.json");
  manifest.finish();

  std::cout << "rfe: " << trace.steps.size() << " steps, winner keeps "
            << trace.steps[trace.winner].active.size() << " features (mean CV AUC "
            << format_double(trace.steps[trace.winner].mean_cv_auc, 6) << ")\n";
  return 0;
}

std::vector<std::pair<std::string, std::string>> parse_pairs(const std::string& text) {
  std::vector<std::pair<std::string, std::string>> pairs;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find(',', start);
    if (end == std::string::npos) end = text.size();
    const std::string item = text.substr(start, end - start);
    const std::size_t colon = item.find(':');
    if (colon == std::string::npos) {
      throw Error("bad --pairs entry '" + item + "', expected feature:interaction");
    }
    pairs.emplace_back(item.substr(0, colon), item.substr(colon + 1));
    start = end + 1;
  }
  return pairs;
}

// Automatic interaction pick (off unless --auto-pairs): split rows at the
// candidate's median and take the candidate whose halves pull the feature's
// attributions furthest apart.
std::string pick_interaction(const ShapMatrix& sm, const FeatureMatrix& m, std::size_t f) {
  std::string best = m.feature_names[f];
  double best_score = -1.0;
  for (std::size_t g = 0; g < m.cols(); ++g) {
    if (g == f) continue;
    std::vector<double> values;
    values.reserve(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r) values.push_back(m.at(r, g));
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];
    double low_sum = 0.0, high_sum = 0.0;
    std::size_t low_n = 0, high_n = 0;
    for (std::size_t r = 0; r < m.rows(); ++r) {
      if (values[r] <= median) {
        low_sum += sm.at(r, f);
        ++low_n;
      } else {
        high_sum += sm.at(r, f);
        ++high_n;
      }
    }
    if (low_n == 0 || high_n == 0) continue;
    const double score =
        std::abs(low_sum / static_cast<double>(low_n) - high_sum / static_cast<double>(high_n));
    if (score > best_score) {
      best_score = score;
      best = m.feature_names[g];
    }
  }
  return best;
}

int cmd_explain(const std::string& model_path, const std::string& features, int top_k,
                const std::string& pairs_text, int auto_pairs, const CommonOptions& opts) {
  ManifestWriter manifest("explain", opts.out_dir);
  manifest.add_input("model", model_path);
  manifest.add_input("features", features);

  const Model model = load_model(model_path);
  FeatureMatrix matrix = load_feature_matrix(features);
  if (matrix.feature_names != model.catalog.active) {
    matrix = matrix.select_columns(model.catalog.active);
  }

  const ShapMatrix sm = tree_shap(model, matrix, opts.jobs);

  // Contract check before anything is written: attributions plus base must
  // reproduce the margin row by row.
  const auto margins = model.predict_margin(matrix);
  for (std::size_t r = 0; r < matrix.rows(); ++r) {
    double total = sm.base_value;
    for (double phi : sm.row(r)) total += phi;
    if (std::abs(total - margins[r]) > kLocalAccuracyTolerance) {
      throw Error("local accuracy violated on row " + std::to_string(r) + ": |" +
                  format_double(total) + " - " + format_double(margins[r]) + "| > 1e-8");
    }
  }

  const fs::path out(opts.out_dir);
  {
    std::ofstream shap_csv(out / "shap.csv");
    if (!shap_csv) throw Error("cannot write shap.csv");
    shap_csv << "# base_value " << format_double(sm.base_value) << "\n";
    shap_csv << "address";
    for (const std::string& name : matrix.feature_names) shap_csv << ',' << name;
    shap_csv << '\n';
    for (std::size_t r = 0; r < matrix.rows(); ++r) {
      shap_csv << matrix.addresses[r];
      for (double phi : sm.row(r)) shap_csv << ',' << format_double(phi);
      shap_csv << '\n';
    }
  }
  manifest.add_output("shap.csv");

  const auto summary = shap_summary(sm, matrix);
  {
    std::ofstream beeswarm(out / "beeswarm.csv");
    if (!beeswarm) throw Error("cannot write beeswarm.csv");
    beeswarm << "rank,feature,mean_abs_phi,address,phi,feature_value\n";
    const std::size_t limit =
        std::min<std::size_t>(summary.size(), top_k > 0 ? static_cast<std::size_t>(top_k)
                                                        : summary.size());
    for (std::size_t rank = 0; rank < limit; ++rank) {
      const auto col = static_cast<std::size_t>(matrix.column_index(summary[rank].feature));
      for (std::size_t r = 0; r < matrix.rows(); ++r) {
        beeswarm << rank + 1 << ',' << summary[rank].feature << ','
                 << format_double(summary[rank].mean_abs_phi) << ',' << matrix.addresses[r]
                 << ',' << format_double(sm.at(r, col)) << ','
                 << format_double(matrix.at(r, col)) << '\n';
      }
    }
  }
  manifest.add_output("beeswarm.csv");

  std::vector<std::pair<std::string, std::string>> pairs = parse_pairs(pairs_text);
  for (int i = 0; i < auto_pairs && i < static_cast<int>(summary.size()); ++i) {
    const auto f = static_cast<std::size_t>(matrix.column_index(summary[i].feature));
    pairs.emplace_back(summary[i].feature, pick_interaction(sm, matrix, f));
  }
  {
    std::ofstream dependence(out / "dependence.csv");
    if (!dependence) throw Error("cannot write dependence.csv");
    dependence << "feature,interaction_feature,address,feature_value,phi,interaction_value\n";
    for (const auto& [feature, interaction] : pairs) {
      for (const DependenceRow& row : dependence_data(sm, matrix, feature, interaction)) {
        dependence << feature << ',' << interaction << ',' << row.address << ','
                   << format_double(row.feature_value) << ',' << format_double(row.phi) << ','
                   << format_double(row.interaction_value) << '\n';
      }
    }
  }
  manifest.add_output("dependence.csv");

  manifest.fields()["rows"] = matrix.rows();
  manifest.fields()["base_value"] = sm.base_value;
  manifest.finish();

  std::cout << "explain: " << matrix.rows() << " rows";
  if (!summary.empty()) {
    std::cout << ", top feature " << summary.front().feature << " (mean |phi| "
              << format_double(summary.front().mean_abs_phi, 6) << ")";
  }
  std::cout << "\n";
  return 0;
}

int cmd_compare(const std::string& features, const std::string& model_a_path,
                const std::string& model_b_path, const CommonOptions& opts) {
  ManifestWriter manifest("compare", opts.out_dir);
  manifest.add_input("features", features);
  manifest.add_input("model_a", model_a_path);
  manifest.add_input("model_b", model_b_path);
  manifest.fields()["seed"] = opts.seed;

  const FeatureMatrix matrix = load_feature_matrix(features);
  const Model model_a = load_model(model_a_path);
  const Model model_b = load_model(model_b_path);

  const SplitPlan plan = stratified_split(matrix.labels, opts.test_fraction, opts.seed);
  const FeatureMatrix test_matrix = matrix.select_rows(plan.test_indices);

  const auto predict_hard = [&](const Model& model) {
    FeatureMatrix projected = test_matrix;
    if (projected.feature_names != model.catalog.active) {
      projected = test_matrix.select_columns(model.catalog.active);
    }
    const auto probs = model.predict_proba(projected);
    std::vector<int> preds(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) preds[i] = probs[i] >= opts.threshold ? 1 : 0;
    return preds;
  };

  const auto preds_a = predict_hard(model_a);
  const auto preds_b = predict_hard(model_b);
  const McNemarResult result = mcnemar(test_matrix.labels, preds_a, preds_b);

  ordered_json report = mcnemar_to_json(result);
  report["seed"] = opts.seed;
  report["threshold"] = opts.threshold;
  report["test_rows"] = test_matrix.rows();
  write_json(fs::path(opts.out_dir) / "mcnemar.json", report);
  manifest.add_output("mcnemar.json");
  manifest.finish();

  std::cout << "compare: b=" << result.b << " c=" << result.c << " exact p="
            << format_double(result.p_exact, 6)
            << (result.degenerate ? " (degenerate: no discordant pairs)" : "") << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"smart-Ponzi detection pipeline over exported transaction logs"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  CommonOptions opts;
  opts.seed = env_seed_or(0);

  const auto add_common = [&](CLI::App* cmd, bool with_search) {
    cmd->add_option("--out", opts.out_dir, "output directory")->required();
    cmd->add_option("--seed", opts.seed, "RNG seed (env PONZI_LENS_SEED as fallback)");
    cmd->add_option("--jobs", opts.jobs, "worker threads; never affects output bytes")
        ->check(CLI::PositiveNumber);
    if (with_search) {
      cmd->add_option("--grid", opts.grid_file, "grid JSON (default grid otherwise)");
      cmd->add_option("--folds", opts.folds, "cross-validation folds")->check(CLI::Range(2, 100));
      cmd->add_option("--test-fraction", opts.test_fraction, "holdout fraction")
          ->check(CLI::Range(0.0, 1.0));
    }
  };

  std::string transactions, labels, features, variant = "d1";
  std::string model_path, model_a_path, model_b_path, pairs_text;
  bool distributions = false;
  std::size_t floor_features = 13;
  int top_k = 10;
  int auto_pairs = 0;

  CLI::App* featurize = app.add_subcommand("featurize", "transaction logs to features.csv");
  featurize->add_option("--transactions", transactions, "transactions.csv")->required();
  featurize->add_option("--labels", labels, "labels.csv")->required();
  featurize->add_option("--variant", variant, "d1, d2, d3 or custom:<file>");
  featurize->add_flag("--distributions", distributions, "also emit per-feature plot data");
  add_common(featurize, false);

  CLI::App* train = app.add_subcommand("train", "grid search, refit, test report");
  train->add_option("--features", features, "features.csv")->required();
  train->add_option("--threshold", opts.threshold, "decision threshold")
      ->check(CLI::Range(0.0, 1.0));
  add_common(train, true);

  CLI::App* rfe = app.add_subcommand("rfe", "recursive feature elimination");
  rfe->add_option("--features", features, "features.csv")->required();
  rfe->add_option("--floor", floor_features, "stop at this many features");
  add_common(rfe, true);

  CLI::App* explain = app.add_subcommand("explain", "SHAP attributions and plot data");
  explain->add_option("--model", model_path, "model.json")->required();
  explain->add_option("--features", features, "features.csv")->required();
  explain->add_option("--top-k", top_k, "features in beeswarm.csv");
  explain->add_option("--pairs", pairs_text, "dependence pairs feature:interaction,...");
  explain->add_option("--auto-pairs", auto_pairs,
                      "derive this many dependence pairs from attribution variance");
  add_common(explain, false);

  CLI::App* compare = app.add_subcommand("compare", "McNemar test between two models");
  compare->add_option("--features", features, "features.csv")->required();
  compare->add_option("--model-a", model_a_path, "first model.json")->required();
  compare->add_option("--model-b", model_b_path, "second model.json")->required();
  compare->add_option("--test-fraction", opts.test_fraction, "holdout fraction")
      ->check(CLI::Range(0.0, 1.0));
  compare->add_option("--threshold", opts.threshold, "decision threshold")
      ->check(CLI::Range(0.0, 1.0));
  add_common(compare, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (featurize->parsed()) {
      return cmd_featurize(transactions, labels, variant, distributions, opts);
    }
    if (train->parsed()) return cmd_train(features, opts);
    if (rfe->parsed()) return cmd_rfe(features, floor_features, opts);
    if (explain->parsed()) {
      return cmd_explain(model_path, features, top_k, pairs_text, auto_pairs, opts);
    }
    if (compare->parsed()) return cmd_compare(features, model_a_path, model_b_path, opts);
  } catch (const std::exception& e) {
    std::cerr << "ponzi-lens: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
