#include "ponzilens/trees.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "ponzilens/metrics.hpp"
#include "ponzilens/rng.hpp"
#include "test_util.hpp"

using namespace ponzilens;

namespace {

FeatureMatrix separable_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  Rng rng(seed);
  return test_util::random_matrix(rng, rows, cols, [](const std::vector<double>& row) {
    return row[0] > 0.5;
  });
}

double logistic_loss(std::span<const int> labels, std::span<const double> probs) {
  double loss = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = std::clamp(probs[i], 1e-12, 1.0 - 1e-12);
    loss -= labels[i] == 1 ? std::log(p) : std::log(1.0 - p);
  }
  return loss / static_cast<double>(labels.size());
}

double soft(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

// Exact greedy reference for a single boosting round from a flat prior:
// enumerate every (feature, distinct value) cut directly on the raw matrix.
struct ExactSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

ExactSplit exact_root_split(const FeatureMatrix& m, const TrainConfig& cfg) {
  const double prior = [&] {
    double pos = 0.0;
    for (int l : m.labels) pos += l;
    return pos / static_cast<double>(m.rows());
  }();
  std::vector<double> g(m.rows()), h(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    g[i] = prior - static_cast<double>(m.labels[i]);
    h[i] = prior * (1.0 - prior);
  }
  const auto score = [&](double gs, double hs) {
    const double t = soft(gs, cfg.reg_alpha);
    return t * t / (hs + cfg.reg_lambda);
  };
  double total_g = 0.0, total_h = 0.0;
  for (std::size_t i = 0; i < m.rows(); ++i) {
    total_g += g[i];
    total_h += h[i];
  }

  ExactSplit best;
  for (std::size_t f = 0; f < m.cols(); ++f) {
    std::vector<double> cuts;
    for (std::size_t r = 0; r < m.rows(); ++r) cuts.push_back(m.at(r, f));
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());
    if (!cuts.empty()) cuts.pop_back();  // max value never splits
    for (double cut : cuts) {
      double gl = 0.0, hl = 0.0;
      std::int64_t nl = 0;
      for (std::size_t r = 0; r < m.rows(); ++r) {
        if (m.at(r, f) <= cut) {
          gl += g[r];
          hl += h[r];
          ++nl;
        }
      }
      if (nl < cfg.min_samples_leaf ||
          static_cast<std::int64_t>(m.rows()) - nl < cfg.min_samples_leaf) {
        continue;
      }
      const double gain =
          0.5 * (score(gl, hl) + score(total_g - gl, total_h - hl) - score(total_g, total_h));
      if (gain > best.gain) best = {static_cast<int>(f), cut, gain};
    }
  }
  return best;
}

Model hand_built_gbdt(double base_score, std::vector<Tree> trees,
                      std::vector<std::string> names) {
  Model model;
  model.kind = ModelKind::Gbdt;
  model.base_score = base_score;
  model.trees = std::move(trees);
  model.catalog.variant = Variant::Custom;
  model.catalog.active = std::move(names);
  model.split_counts.assign(model.catalog.active.size(), 0);
  for (const Tree& tree : model.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) ++model.split_counts[static_cast<std::size_t>(node.feature)];
    }
  }
  return model;
}

}  // namespace

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.n_bins = 1;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.n_bins = 255;
  cfg.colsample = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.colsample = 1.0;
  cfg.learning_rate = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.learning_rate = 0.1;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("pure labels collapse a decision tree to one leaf") {
  Rng rng(1);
  FeatureMatrix m = test_util::random_matrix(rng, 40, 3, [](const auto&) { return true; });
  TrainConfig cfg;
  cfg.model_kind = ModelKind::DecisionTree;
  cfg.max_depth = 5;
  const Model model = fit(m, cfg);
  REQUIRE(model.trees.size() == 1);
  REQUIRE(model.trees[0].nodes.size() == 1);
  CHECK(model.trees[0].nodes[0].value == 1.0);
  const auto probs = model.predict_proba(m);
  for (double p : probs) CHECK(p == 1.0);
}

TEST_CASE("boosting refuses degenerate labels") {
  Rng rng(2);
  FeatureMatrix m = test_util::random_matrix(rng, 30, 3, [](const auto&) { return true; });
  TrainConfig cfg;
  CHECK_THROWS_WITH_AS(fit(m, cfg), doctest::Contains("degenerate labels"), Error);
  cfg.model_kind = ModelKind::RandomForest;
  CHECK_THROWS_AS(fit(m, cfg), Error);
}

TEST_CASE("gbdt separates a one-feature threshold problem") {
  const FeatureMatrix m = separable_matrix(500, 8, 99);
  TrainConfig cfg;
  cfg.n_estimators = 50;
  cfg.max_depth = 3;
  cfg.learning_rate = 0.1;
  const Model model = fit(m, cfg);
  const auto probs = model.predict_proba(m);
  CHECK(auc_score(m.labels, probs) == 1.0);
  for (std::size_t i = 0; i < probs.size(); ++i) {
    CHECK(probs[i] > 0.0);
    CHECK(probs[i] < 1.0);
    CHECK((m.labels[i] == 1) == (probs[i] > 0.5));
  }
}

TEST_CASE("empty ensemble predicts the training prior") {
  const FeatureMatrix m = separable_matrix(64, 4, 5);
  double prior = 0.0;
  for (int l : m.labels) prior += l;
  prior /= static_cast<double>(m.rows());

  TrainConfig cfg;
  cfg.n_estimators = 0;
  const Model model = fit(m, cfg);
  CHECK(model.trees.empty());
  for (double p : model.predict_proba(m)) CHECK(p == doctest::Approx(prior).epsilon(1e-12));
}

TEST_CASE("margins add base plus routed leaf values") {
  // Hand-built depth-2 tree over two features.
  Tree tree;
  tree.nodes.resize(7);
  tree.nodes[0] = {0, 0.5, 0.0, 1.0, 8.0, 1, 2};
  tree.nodes[1] = {1, 0.25, 0.0, 1.0, 5.0, 3, 4};
  tree.nodes[2] = {1, 0.75, 0.0, 1.0, 3.0, 5, 6};
  tree.nodes[3] = {-1, 0.0, 0.11, 0.0, 3.0, -1, -1};
  tree.nodes[4] = {-1, 0.0, -0.23, 0.0, 2.0, -1, -1};
  tree.nodes[5] = {-1, 0.0, 0.47, 0.0, 2.0, -1, -1};
  tree.nodes[6] = {-1, 0.0, -0.05, 0.0, 1.0, -1, -1};
  const Model model = hand_built_gbdt(-0.4, {tree}, {"f0", "f1"});

  FeatureMatrix rows;
  rows.feature_names = {"f0", "f1"};
  rows.addresses = {"a", "b", "c", "d"};
  rows.labels = {0, 0, 0, 0};
  rows.values = {0.1, 0.1,   // left-left
                 0.1, 0.9,   // left-right
                 0.9, 0.5,   // right-left
                 0.9, 0.9};  // right-right
  const auto margins = model.predict_margin(rows);
  CHECK(margins[0] == doctest::Approx(-0.4 + 0.11).epsilon(1e-15));
  CHECK(margins[1] == doctest::Approx(-0.4 - 0.23).epsilon(1e-15));
  CHECK(margins[2] == doctest::Approx(-0.4 + 0.47).epsilon(1e-15));
  CHECK(margins[3] == doctest::Approx(-0.4 - 0.05).epsilon(1e-15));

  const auto probs = model.predict_proba(rows);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(probs[i] == doctest::Approx(1.0 / (1.0 + std::exp(-margins[i]))).epsilon(1e-15));
  }

  FeatureMatrix wrong;
  wrong.feature_names = {"f0"};
  wrong.addresses = {"a"};
  wrong.labels = {0};
  wrong.values = {0.1};
  CHECK_THROWS_AS(model.predict_proba(wrong), Error);
}

TEST_CASE("split-count importance: counting and tie order") {
  Tree stump;  // single leaf
  stump.nodes.push_back({-1, 0.0, 0.2, 0.0, 4.0, -1, -1});
  const Model single = hand_built_gbdt(0.0, {stump}, {"f0", "f1", "f2"});
  for (const auto& [name, count] : split_count_importance(single)) CHECK(count == 0);

  Tree t1;
  t1.nodes.resize(7);
  t1.nodes[0] = {0, 0.5, 0.0, 1.0, 8.0, 1, 2};
  t1.nodes[1] = {0, 0.25, 0.0, 1.0, 4.0, 3, 4};
  t1.nodes[2] = {2, 0.75, 0.0, 1.0, 4.0, 5, 6};
  for (int i = 3; i < 7; ++i) t1.nodes[static_cast<std::size_t>(i)] = {-1, 0, 0.1, 0, 2.0, -1, -1};
  Tree t2;
  t2.nodes.resize(3);
  t2.nodes[0] = {0, 0.6, 0.0, 1.0, 8.0, 1, 2};
  t2.nodes[1] = {-1, 0, 0.1, 0, 4.0, -1, -1};
  t2.nodes[2] = {-1, 0, -0.1, 0, 4.0, -1, -1};

  const Model model = hand_built_gbdt(0.0, {t1, t2}, {"f0", "f1", "f2"});
  const auto ranked = split_count_importance(model);
  REQUIRE(ranked.size() == 3);
  CHECK(ranked[0] == std::pair<std::string, std::int64_t>{"f0", 3});
  CHECK(ranked[1] == std::pair<std::string, std::int64_t>{"f2", 1});
  CHECK(ranked[2] == std::pair<std::string, std::int64_t>{"f1", 0});

  std::int64_t internal = 0;
  for (const Tree& tree : model.trees) {
    for (const TreeNode& node : tree.nodes) internal += node.is_leaf() ? 0 : 1;
  }
  std::int64_t counted = 0;
  for (const auto& [name, count] : ranked) counted += count;
  CHECK(counted == internal);
}

TEST_CASE("fitted splits always carry positive gain and bounded depth") {
  const FeatureMatrix m = separable_matrix(300, 6, 1234);
  for (ModelKind kind :
       {ModelKind::Gbdt, ModelKind::DecisionTree, ModelKind::RandomForest}) {
    TrainConfig cfg;
    cfg.model_kind = kind;
    cfg.n_estimators = 10;
    cfg.max_depth = 4;
    cfg.colsample = 0.6;
    cfg.seed = 9;
    const Model model = fit(m, cfg);
    for (const Tree& tree : model.trees) {
      CHECK(tree.max_node_depth() <= cfg.max_depth);
      for (const TreeNode& node : tree.nodes) {
        if (!node.is_leaf()) CHECK(node.gain > 0.0);
      }
    }
  }
}

TEST_CASE("prediction is constant within histogram bins") {
  const FeatureMatrix m = separable_matrix(200, 4, 77);
  TrainConfig cfg;
  cfg.n_estimators = 20;
  cfg.max_depth = 4;
  const Model model = fit(m, cfg);

  // Collect the model's thresholds per feature; nudging a value without
  // crossing any of them must keep the prediction bit-identical.
  std::vector<std::vector<double>> thresholds(m.cols());
  for (const Tree& tree : model.trees) {
    for (const TreeNode& node : tree.nodes) {
      if (!node.is_leaf()) {
        thresholds[static_cast<std::size_t>(node.feature)].push_back(node.threshold);
      }
    }
  }

  Rng rng(31);
  FeatureMatrix probe = m;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t r = rng.below(m.rows());
    const std::size_t f = rng.below(m.cols());
    const double x = m.at(r, f);
    double gap = 1e9;
    for (double t : thresholds[f]) {
      const double d = std::abs(t - x);
      if (d > 0 && d < gap) gap = d;
    }
    bool at_threshold = false;
    for (double t : thresholds[f]) at_threshold |= t == x;
    // moving down never crosses "x <= t" when x sits exactly on a threshold
    const double delta = at_threshold ? -gap / 2 : gap / 2;

    const auto before = model.predict_proba(probe);
    probe.values[r * probe.cols() + f] = x + delta;
    const auto after = model.predict_proba(probe);
    probe.values[r * probe.cols() + f] = x;
    CHECK(before[r] == after[r]);
  }
}

TEST_CASE("identical inputs give bit-identical models regardless of jobs") {
  const FeatureMatrix m = separable_matrix(250, 10, 4242);
  for (ModelKind kind : {ModelKind::Gbdt, ModelKind::RandomForest}) {
    TrainConfig cfg;
    cfg.model_kind = kind;
    cfg.n_estimators = 12;
    cfg.max_depth = 5;
    cfg.colsample = 0.7;
    cfg.seed = 777;
    const Model a = fit(m, cfg, 1);
    const Model b = fit(m, cfg, 8);
    CHECK(model_to_json(a) == model_to_json(b));
  }
}

TEST_CASE("training loss decreases monotonically with exact-style settings") {
  const FeatureMatrix m = separable_matrix(300, 5, 2020);
  TrainConfig cfg;
  cfg.n_estimators = 30;
  cfg.max_depth = 3;
  cfg.colsample = 1.0;
  cfg.learning_rate = 0.2;
  const Model model = fit(m, cfg);

  double previous = logistic_loss(m.labels, model.predict_proba(m, 0));
  for (int t = 1; t <= cfg.n_estimators; ++t) {
    const double current = logistic_loss(m.labels, model.predict_proba(m, t));
    CHECK(current <= previous + 1e-12);
    previous = current;
  }
}

TEST_CASE("histogram training matches exact greedy splits on small data") {
  Rng rng(606);
  for (int trial = 0; trial < 10; ++trial) {
    // <= 40 rows so 255 bins give every distinct value its own bin.
    FeatureMatrix m = test_util::random_matrix(
        rng, 25 + rng.below(15), 3, [&](const std::vector<double>& row) {
          return row[0] + 0.3 * row[1] > 0.8;
        });
    bool pos = false, neg = false;
    for (int l : m.labels) (l == 1 ? pos : neg) = true;
    if (!pos || !neg) continue;

    TrainConfig cfg;
    cfg.n_estimators = 1;
    cfg.max_depth = 1;
    cfg.reg_lambda = 1.0;
    cfg.reg_alpha = 0.1;
    const Model model = fit(m, cfg);
    const ExactSplit expected = exact_root_split(m, cfg);

    REQUIRE(model.trees.size() == 1);
    const Tree& tree = model.trees[0];
    if (expected.feature < 0) {
      CHECK(tree.nodes.size() == 1);
      continue;
    }
    REQUIRE(tree.nodes.size() == 3);
    CHECK(tree.nodes[0].feature == expected.feature);
    CHECK(tree.nodes[0].threshold == expected.threshold);
    CHECK(tree.nodes[0].gain == doctest::Approx(expected.gain).epsilon(1e-12));
  }
}

TEST_CASE("bin count does not matter once every distinct value has a bin") {
  const FeatureMatrix m = separable_matrix(40, 4, 11);
  TrainConfig a;
  a.n_estimators = 8;
  a.max_depth = 3;
  a.n_bins = 64;
  TrainConfig b = a;
  b.n_bins = 255;
  Model coarse = fit(m, a);
  const Model fine = fit(m, b);
  coarse.config = fine.config;  // the echoed n_bins is the only allowed difference
  CHECK(model_to_json(coarse) == model_to_json(fine));
}

TEST_CASE("forest averages tree probabilities") {
  const FeatureMatrix m = separable_matrix(400, 6, 31415);
  TrainConfig cfg;
  cfg.model_kind = ModelKind::RandomForest;
  cfg.n_estimators = 25;
  cfg.max_depth = 6;
  cfg.colsample = 0.5;
  cfg.seed = 5;
  const Model model = fit(m, cfg);
  CHECK(model.trees.size() == 25);
  const auto probs = model.predict_proba(m);
  CHECK(auc_score(m.labels, probs) > 0.95);
  for (double p : probs) {
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
  }
}

TEST_CASE("model JSON round trip reproduces predictions bit-exactly") {
  Rng rng(88);
  const FeatureMatrix m = separable_matrix(150, 5, 777);
  for (ModelKind kind :
       {ModelKind::Gbdt, ModelKind::DecisionTree, ModelKind::RandomForest}) {
    TrainConfig cfg;
    cfg.model_kind = kind;
    cfg.n_estimators = 7;
    cfg.max_depth = 4;
    cfg.colsample = 0.8;
    cfg.seed = 3;
    const Model model = fit(m, cfg);

    const std::string text = model_to_json(model);
    const Model loaded = model_from_json(text);
    CHECK(model_to_json(loaded) == text);  // stable serialization
    CHECK(loaded.has_covers);
    CHECK(loaded.split_counts == model.split_counts);
    CHECK(loaded.config == model.config);

    const auto before = model.predict_proba(m);
    const auto after = loaded.predict_proba(m);
    for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);
  }
}

TEST_CASE("model file round trip through disk") {
  const FeatureMatrix m = separable_matrix(80, 4, 123);
  TrainConfig cfg;
  cfg.n_estimators = 5;
  cfg.max_depth = 3;
  const Model model = fit(m, cfg);
  const auto dir = test_util::fresh_temp_dir("model");
  save_model((dir / "model.json").string(), model);
  const Model loaded = load_model((dir / "model.json").string());
  const auto before = model.predict_margin(m);
  const auto after = loaded.predict_margin(m);
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(before[i] == after[i]);

  CHECK_THROWS_AS(load_model((dir / "missing.json").string()), Error);
  test_util::write_file(dir / "garbage.json", "{\"format\": \"nope\"}");
  CHECK_THROWS_AS(load_model((dir / "garbage.json").string()), Error);
}
