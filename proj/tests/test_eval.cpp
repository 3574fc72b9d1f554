#include <gtest/gtest.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"
#include "fproxkit/eval.hpp"
#include "fproxkit/rng.hpp"
#include "oracles.hpp"

using fproxkit::default_grid;
using fproxkit::evaluate;
using fproxkit::EvalReport;
using fproxkit::FeatureMatrix;
using fproxkit::ForestParams;
using fproxkit::grid_search;
using fproxkit::make_split_plan;
using fproxkit::ParamGrid;
using fproxkit::parse_eval_report;
using fproxkit::pr_auc_ovr;
using fproxkit::pr_points;
using fproxkit::roc_auc_ovr;
using fproxkit::roc_points;
using fproxkit::serialize_split_plan;
using fproxkit::SplitPlan;
using fproxkit::subset;

namespace {

std::string expect_error(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const fproxkit::Error& e) {
    return e.code();
  }
  return "";
}

std::vector<int> balanced_labels(std::size_t per_class) {
  std::vector<int> labels;
  for (int c = 1; c <= 4; ++c) labels.insert(labels.end(), per_class, c);
  return labels;
}

// One-feature matrix whose value is a deterministic function of the label.
FeatureMatrix matrix_from_values(const std::vector<double>& values) {
  FeatureMatrix m;
  m.schema = {{"x", "unit"}};
  for (std::size_t i = 0; i < values.size(); ++i) {
    m.rows.push_back({values[i]});
    m.row_ids.push_back("r" + std::to_string(100 + i));
  }
  return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// split plans

TEST(SplitPlanTest, BalancedFourClassCounts) {
  const auto labels = balanced_labels(50);  // 200 rows
  const auto plan = make_split_plan(labels, 7);
  EXPECT_EQ(plan.seed, 7u);
  EXPECT_EQ(plan.tuning.size(), 40u);  // rounded 20%
  for (const auto& fold : plan.folds) EXPECT_EQ(fold.size(), 32u);

  // stratification: 10 tuning rows and 8 rows per fold from every class
  for (int cls = 1; cls <= 4; ++cls) {
    const auto count = [&](const std::vector<std::size_t>& cell) {
      return std::count_if(cell.begin(), cell.end(),
                           [&](std::size_t i) { return labels[i] == cls; });
    };
    EXPECT_EQ(count(plan.tuning), 10);
    for (const auto& fold : plan.folds) EXPECT_EQ(count(fold), 8);
  }
}

TEST(SplitPlanTest, CellsAreSortedAndDeterministic) {
  const auto labels = balanced_labels(13);
  const auto plan = make_split_plan(labels, 99);
  EXPECT_TRUE(std::is_sorted(plan.tuning.begin(), plan.tuning.end()));
  for (const auto& fold : plan.folds)
    EXPECT_TRUE(std::is_sorted(fold.begin(), fold.end()));
  EXPECT_EQ(plan, make_split_plan(labels, 99));
  EXPECT_NE(plan, make_split_plan(labels, 100));
}

TEST(SplitPlanTest, RandomLabelVectorsPartitionWithTightStratification) {
  fproxkit::rng::Engine g(2024);
  for (int iter = 0; iter < 100; ++iter) {
    std::vector<int> labels;
    for (int c = 1; c <= 4; ++c) {
      const std::size_t n_c = 10 + fproxkit::rng::uniform_index(g, 30);
      labels.insert(labels.end(), n_c, c);
    }
    fproxkit::rng::shuffle(labels, g);
    const auto plan = make_split_plan(labels, 1000 + iter);

    // exact partition of 0..n-1
    std::vector<int> hits(labels.size(), 0);
    for (const std::size_t i : plan.tuning) ++hits.at(i);
    for (const auto& fold : plan.folds)
      for (const std::size_t i : fold) ++hits.at(i);
    EXPECT_TRUE(std::all_of(hits.begin(), hits.end(), [](int h) { return h == 1; }));

    EXPECT_EQ(plan.tuning.size(), (2 * labels.size() + 5) / 10);

    for (int cls = 1; cls <= 4; ++cls) {
      const auto count = [&](const std::vector<std::size_t>& cell) {
        return static_cast<std::size_t>(std::count_if(
            cell.begin(), cell.end(), [&](std::size_t i) { return labels[i] == cls; }));
      };
      const std::size_t n_c =
          static_cast<std::size_t>(std::count(labels.begin(), labels.end(), cls));
      const std::size_t in_tuning = count(plan.tuning);
      EXPECT_GE(in_tuning, n_c / 5);
      EXPECT_LE(in_tuning, n_c / 5 + 1);
      std::size_t lo = labels.size(), hi = 0;
      for (const auto& fold : plan.folds) {
        const std::size_t k = count(fold);
        lo = std::min(lo, k);
        hi = std::max(hi, k);
      }
      EXPECT_LE(hi - lo, 1u) << "class " << cls << " spread across folds";
    }
  }
}

TEST(SplitPlanTest, SmallClassesRejected) {
  std::vector<int> labels = balanced_labels(10);
  labels.push_back(2);  // class 2 now 11 rows; fine
  EXPECT_NO_THROW(make_split_plan(labels, 1));
  labels.erase(std::find(labels.begin(), labels.end(), 3));  // class 3 down to 9
  EXPECT_EQ(expect_error([&] { make_split_plan(labels, 1); }), "split_class");
  EXPECT_EQ(expect_error([] { make_split_plan({}, 1); }), "split_empty");
}

TEST(SplitPlanTest, SerializeListsEveryRowWithItsCell) {
  const std::vector<int> labels(10, 1);
  const auto plan = make_split_plan(labels, 5);
  std::vector<std::string> ids;
  for (int i = 0; i < 10; ++i) ids.push_back("p" + std::to_string(i));
  const auto rows = fproxkit::csv::parse(serialize_split_plan(plan, ids));
  ASSERT_EQ(rows.size(), 11u);
  EXPECT_EQ(rows[0], (std::vector<std::string>{"id", "cell"}));
  std::map<std::string, std::string> cell_of;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    ASSERT_EQ(rows[r].size(), 2u);
    EXPECT_EQ(rows[r][0], ids[r - 1]);  // matrix row order
    cell_of[rows[r][0]] = rows[r][1];
  }
  for (const std::size_t i : plan.tuning) EXPECT_EQ(cell_of.at(ids[i]), "tuning");
  for (std::size_t f = 0; f < 5; ++f)
    for (const std::size_t i : plan.folds[f])
      EXPECT_EQ(cell_of.at(ids[i]), "fold" + std::to_string(f));
}

// ---------------------------------------------------------------------------
// ranking metrics

TEST(Metrics, HandWorkedAuc) {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<bool> y = {false, false, true, true};
  EXPECT_DOUBLE_EQ(roc_auc_ovr(s, y), 0.75);
  EXPECT_DOUBLE_EQ(roc_auc_ovr({1, 2, 3, 4}, {false, false, true, true}), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc_ovr({4, 3, 2, 1}, {false, false, true, true}), 0.0);
  // every score tied -> chance level exactly
  EXPECT_DOUBLE_EQ(roc_auc_ovr({2, 2, 2, 2, 2}, {true, false, true, false, false}), 0.5);
}

TEST(Metrics, MatchesPairwiseOracleOnTieHeavyData) {
  fproxkit::rng::Engine g(31);
  int scored = 0, degenerate = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 2 + fproxkit::rng::uniform_index(g, 49);
    std::vector<double> scores(n);
    std::vector<bool> positives(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(fproxkit::rng::uniform_index(g, 8)) / 4.0;
      positives[i] = fproxkit::rng::uniform_index(g, 2) == 1;
    }
    const auto expected = oracles::pairwise_auc(scores, positives);
    if (!expected) {
      EXPECT_EQ(expect_error([&] { roc_auc_ovr(scores, positives); }), "auc_degenerate");
      ++degenerate;
      continue;
    }
    EXPECT_NEAR(roc_auc_ovr(scores, positives), *expected, 1e-12);
    ++scored;
  }
  EXPECT_GT(scored, 800);
  EXPECT_GT(degenerate, 0);
}

TEST(Metrics, MatchesPrecisionSweepOracle) {
  fproxkit::rng::Engine g(32);
  int scored = 0;
  for (int iter = 0; iter < 1000; ++iter) {
    const std::size_t n = 1 + fproxkit::rng::uniform_index(g, 50);
    std::vector<double> scores(n);
    std::vector<bool> positives(n);
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(fproxkit::rng::uniform_index(g, 6)) / 3.0;
      positives[i] = fproxkit::rng::uniform_index(g, 3) == 0;
    }
    const auto expected = oracles::sweep_average_precision(scores, positives);
    if (!expected) {
      EXPECT_EQ(expect_error([&] { pr_auc_ovr(scores, positives); }), "aup_degenerate");
      continue;
    }
    EXPECT_NEAR(pr_auc_ovr(scores, positives), *expected, 1e-12);
    ++scored;
  }
  EXPECT_GT(scored, 800);
}

TEST(Metrics, AucComplementsUnderLabelFlip) {
  fproxkit::rng::Engine g(33);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 2 + fproxkit::rng::uniform_index(g, 40);
    std::vector<double> scores(n);
    std::vector<bool> pos(n), neg(n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(fproxkit::rng::uniform_index(g, 5));
      pos[i] = fproxkit::rng::uniform_index(g, 2) == 1;
      neg[i] = !pos[i];
      p += pos[i];
    }
    if (p == 0 || p == n) continue;
    EXPECT_NEAR(roc_auc_ovr(scores, pos) + roc_auc_ovr(scores, neg), 1.0, 1e-12);
  }
}

TEST(Metrics, AucIsOrderInvariant) {
  const std::vector<double> s = {0.2, 0.9, 0.2, 0.5, 0.7};
  const std::vector<bool> y = {false, true, true, false, true};
  const double base = roc_auc_ovr(s, y);
  fproxkit::rng::Engine g(34);
  std::vector<std::size_t> idx(s.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (int iter = 0; iter < 20; ++iter) {
    fproxkit::rng::shuffle(idx, g);
    std::vector<double> s2;
    std::vector<bool> y2;
    for (const std::size_t i : idx) {
      s2.push_back(s[i]);
      y2.push_back(y[i]);
    }
    EXPECT_DOUBLE_EQ(roc_auc_ovr(s2, y2), base);
    EXPECT_DOUBLE_EQ(pr_auc_ovr(s2, y2), pr_auc_ovr(s, y));
  }
}

TEST(Metrics, ShapeAndDegeneracyErrors) {
  EXPECT_EQ(expect_error([] { roc_auc_ovr({1, 2, 3}, {true, false}); }), "metric_shape");
  EXPECT_EQ(expect_error([] { pr_auc_ovr({1, 2, 3}, {true, false}); }), "metric_shape");
  EXPECT_EQ(expect_error([] { roc_auc_ovr({1, 2}, {true, true}); }), "auc_degenerate");
  EXPECT_EQ(expect_error([] { roc_auc_ovr({1, 2}, {false, false}); }), "auc_degenerate");
  EXPECT_EQ(expect_error([] { pr_auc_ovr({1, 2}, {false, false}); }), "aup_degenerate");
  EXPECT_NO_THROW(pr_auc_ovr({1, 2}, {true, true}));  // all-positive AP is defined
}

TEST(Metrics, RocCurveMatchesAucByTrapezoid) {
  // known tiny case first
  const auto pts = roc_points({0.9, 0.8, 0.7}, {true, false, true});
  ASSERT_EQ(pts.size(), 4u);
  EXPECT_EQ(pts[0], (std::array<double, 2>{0.0, 0.0}));
  EXPECT_EQ(pts[1], (std::array<double, 2>{0.0, 0.5}));
  EXPECT_EQ(pts[2], (std::array<double, 2>{1.0, 0.5}));
  EXPECT_EQ(pts[3], (std::array<double, 2>{1.0, 1.0}));

  fproxkit::rng::Engine g(35);
  for (int iter = 0; iter < 200; ++iter) {
    const std::size_t n = 2 + fproxkit::rng::uniform_index(g, 30);
    std::vector<double> scores(n);
    std::vector<bool> positives(n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(fproxkit::rng::uniform_index(g, 6)) / 2.0;
      positives[i] = fproxkit::rng::uniform_index(g, 2) == 1;
      p += positives[i];
    }
    if (p == 0 || p == n) continue;
    const auto curve = roc_points(scores, positives);
    ASSERT_GE(curve.size(), 2u);
    EXPECT_EQ(curve.front(), (std::array<double, 2>{0.0, 0.0}));
    EXPECT_EQ(curve.back(), (std::array<double, 2>{1.0, 1.0}));
    double area = 0.0;
    for (std::size_t i = 1; i < curve.size(); ++i) {
      EXPECT_GE(curve[i][0], curve[i - 1][0]);  // monotone in both coordinates
      EXPECT_GE(curve[i][1], curve[i - 1][1]);
      area += (curve[i][0] - curve[i - 1][0]) * (curve[i][1] + curve[i - 1][1]) / 2.0;
    }
    EXPECT_NEAR(area, roc_auc_ovr(scores, positives), 1e-12);
  }
}

TEST(Metrics, PrCurveShape) {
  const auto pts = pr_points({0.9, 0.8}, {true, false});
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0], (std::array<double, 2>{0.0, 1.0}));  // conventional anchor
  EXPECT_EQ(pts[1], (std::array<double, 2>{1.0, 1.0}));
  EXPECT_EQ(pts[2], (std::array<double, 2>{1.0, 0.5}));

  fproxkit::rng::Engine g(36);
  for (int iter = 0; iter < 100; ++iter) {
    const std::size_t n = 1 + fproxkit::rng::uniform_index(g, 30);
    std::vector<double> scores(n);
    std::vector<bool> positives(n);
    std::size_t p = 0;
    for (std::size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(fproxkit::rng::uniform_index(g, 4));
      positives[i] = fproxkit::rng::uniform_index(g, 2) == 1;
      p += positives[i];
    }
    if (p == 0) continue;
    const auto curve = pr_points(scores, positives);
    EXPECT_EQ(curve.front(), (std::array<double, 2>{0.0, 1.0}));
    EXPECT_DOUBLE_EQ(curve.back()[0], 1.0);  // full recall once everything is predicted
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_GE(curve[i][0], curve[i - 1][0]);
  }
}

// ---------------------------------------------------------------------------
// subsetting

TEST(Subset, PicksRowsInRequestOrder) {
  FeatureMatrix m = matrix_from_values({10, 20, 30});
  const auto s = subset(m, {2, 0});
  ASSERT_EQ(s.n_rows(), 2u);
  EXPECT_EQ(s.rows[0][0], 30.0);
  EXPECT_EQ(s.rows[1][0], 10.0);
  EXPECT_EQ(s.row_ids, (std::vector<std::string>{"r102", "r100"}));
  EXPECT_EQ(s.schema.size(), m.schema.size());

  m.row_ids.clear();
  EXPECT_TRUE(subset(m, {1}).row_ids.empty());

  const std::vector<int> v = {5, 6, 7};
  EXPECT_EQ(subset(v, {2, 2, 0}), (std::vector<int>{7, 7, 5}));
}

// ---------------------------------------------------------------------------
// grids

TEST(Grid, DefaultGridEnumeratesTwelveConfigsInNestingOrder) {
  const auto grid = default_grid(77);
  ASSERT_EQ(grid.size(), 12u);
  const std::size_t want_trees[] = {100, 100, 100, 100, 100, 100, 300, 300, 300, 300, 300, 300};
  const std::size_t want_depth[] = {10, 10, 20, 20, 0, 0, 10, 10, 20, 20, 0, 0};
  const std::size_t want_msl[] = {1, 5, 1, 5, 1, 5, 1, 5, 1, 5, 1, 5};
  for (std::size_t i = 0; i < 12; ++i) {
    EXPECT_EQ(grid[i].n_trees, want_trees[i]) << i;
    EXPECT_EQ(grid[i].max_depth, want_depth[i]) << i;
    EXPECT_EQ(grid[i].min_samples_leaf, want_msl[i]) << i;
    EXPECT_EQ(grid[i].seed, 77u) << i;
    EXPECT_EQ(grid[i].features_per_split, 0u) << i;
  }
}

namespace {

// Two interleaved clusters per class on one coordinate pair: class 1 sits at
// (0,0) and (1,1), class 2 at (0,1) and (1,0). No single split helps, so a
// depth-1 forest stays at chance while a deeper one separates cleanly.
void make_xor_data(FeatureMatrix& m, std::vector<int>& labels, std::size_t per_cluster) {
  m.schema = {{"x", "unit"}, {"y", "unit"}};
  fproxkit::rng::Engine g(5150);
  const double corners[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
  const int cls[4] = {1, 1, 2, 2};
  std::size_t serial = 0;
  for (int k = 0; k < 4; ++k)
    for (std::size_t i = 0; i < per_cluster; ++i) {
      m.rows.push_back({corners[k][0] + 0.05 * fproxkit::rng::normal(g),
                        corners[k][1] + 0.05 * fproxkit::rng::normal(g)});
      m.row_ids.push_back("x" + std::to_string(serial++));
      labels.push_back(cls[k]);
    }
}

}  // namespace

TEST(GridSearch, PrefersTheConfigurationThatCanSeparate) {
  FeatureMatrix m;
  std::vector<int> labels;
  make_xor_data(m, labels, 15);

  ForestParams shallow, deep;
  shallow.n_trees = deep.n_trees = 30;
  shallow.max_depth = 1;
  deep.max_depth = 4;
  shallow.features_per_split = deep.features_per_split = 2;
  shallow.seed = deep.seed = 9;

  const auto res = grid_search(m, labels, {shallow, deep}, 9);
  EXPECT_EQ(res.best.max_depth, 4u);
  ASSERT_EQ(res.trace.size(), 2u);
  ASSERT_TRUE(res.trace[0].ok);
  ASSERT_TRUE(res.trace[1].ok);
  EXPECT_GT(res.trace[1].objective, res.trace[0].objective);
  EXPECT_GT(res.best_objective, 0.9);
  EXPECT_LT(res.trace[0].objective, 0.9);  // depth-1 stumps cannot express the pattern
  EXPECT_DOUBLE_EQ(res.best_objective, res.trace[1].objective);

  // byte-for-byte repeatable
  const auto res2 = grid_search(m, labels, {shallow, deep}, 9);
  EXPECT_EQ(res2.best, res.best);
  EXPECT_EQ(res2.best_objective, res.best_objective);
  EXPECT_EQ(res2.trace[0].objective, res.trace[0].objective);
}

TEST(GridSearch, TiesKeepTheEarliestEntry) {
  // The feature equals the class, so trees reach purity well before depth 10;
  // both configurations therefore grow identical trees and tie exactly.
  std::vector<int> labels = balanced_labels(15);
  std::vector<double> values(labels.begin(), labels.end());
  const auto m = matrix_from_values(values);

  ForestParams first, second;
  first.n_trees = second.n_trees = 25;
  first.seed = second.seed = 4;
  first.max_depth = 10;
  second.max_depth = 0;

  const auto res = grid_search(m, labels, {first, second}, 4);
  ASSERT_EQ(res.trace.size(), 2u);
  EXPECT_EQ(res.trace[0].objective, res.trace[1].objective);
  EXPECT_EQ(res.best.max_depth, 10u);  // earliest of the tied pair
  EXPECT_GT(res.best_objective, 0.999);
}

TEST(GridSearch, InputErrors) {
  const auto m = matrix_from_values({1, 2, 3, 4});
  const std::vector<int> labels = {1, 2, 1, 2};

  EXPECT_EQ(expect_error([&] { grid_search(m, labels, {}, 1); }), "grid_empty");
  EXPECT_EQ(expect_error([&] { grid_search(m, {1, 2}, default_grid(1), 1); }), "eval_shape");

  // an invalid parameter set anywhere aborts before any training
  ForestParams good, bad;
  bad.n_trees = 0;
  EXPECT_EQ(expect_error([&] { grid_search(m, labels, {good, bad}, 1); }), "forest_params");
}

TEST(GridSearch, AllConfigurationsFailing) {
  // min_samples_leaf is far larger than the training slice, so every entry
  // fails at fit time and the search reports that collectively.
  std::vector<int> labels = balanced_labels(10);
  std::vector<double> values(labels.begin(), labels.end());
  const auto m = matrix_from_values(values);
  ForestParams p;
  p.min_samples_leaf = 1000;
  EXPECT_EQ(expect_error([&] { grid_search(m, labels, {p}, 1); }), "grid_all_failed");

  // single-class data trains but leaves no scoreable class
  const auto single = matrix_from_values({1, 1, 2, 2, 1, 2, 1, 2, 1, 2});
  EXPECT_EQ(expect_error([&] {
              grid_search(single, std::vector<int>(10, 1), {ForestParams{}}, 1);
            }),
            "grid_all_failed");
}

// ---------------------------------------------------------------------------
// cross-validated evaluation

namespace {

ParamGrid tiny_grid(std::uint64_t seed) {
  ForestParams p;
  p.n_trees = 25;
  p.seed = seed;
  return {p};
}

}  // namespace

TEST(Evaluate, SeparableBlobsScoreHighEverywhere) {
  const auto data = oracles::make_blobs(11, 30);
  const auto plan = make_split_plan(data.labels, 11);
  const auto report = evaluate(data.features, data.labels, plan, tiny_grid(11), "blobs");

  EXPECT_EQ(report.model_name, "blobs");
  EXPECT_EQ(report.seed, 11u);
  EXPECT_EQ(report.n_rows, 120u);
  EXPECT_EQ(report.chosen_params.n_trees, 25u);
  ASSERT_EQ(report.confusion.size(), 5u);

  // every fold's confusion matrix accounts for exactly that fold's rows
  for (std::size_t k = 0; k < 5; ++k) {
    std::size_t total = 0;
    for (const auto& row : report.confusion[k])
      for (const std::size_t v : row) total += v;
    EXPECT_EQ(total, plan.folds[k].size());
    for (int cls = 1; cls <= 4; ++cls) {
      const auto want = std::count_if(plan.folds[k].begin(), plan.folds[k].end(),
                                      [&](std::size_t i) { return data.labels[i] == cls; });
      std::size_t got = 0;
      for (const std::size_t v : report.confusion[k][cls - 1]) got += v;
      EXPECT_EQ(got, static_cast<std::size_t>(want));
    }
  }

  for (int c = 0; c < 4; ++c) {
    ASSERT_TRUE(report.auc[c].has_value());
    ASSERT_TRUE(report.aup[c].has_value());
    EXPECT_EQ(report.auc[c]->n_folds, 5u);
    EXPECT_EQ(report.auc[c]->folds.size(), 5u);
    EXPECT_GT(report.auc[c]->mean, 0.9);  // 3-sigma separation is easy
    EXPECT_GT(report.aup[c]->mean, 0.8);
    EXPECT_LE(report.auc[c]->mean, 1.0);
    EXPECT_GE(report.auc[c]->stdev, 0.0);
  }
  EXPECT_GT(report.timings.grid_seconds + report.timings.folds_seconds, 0.0);
}

TEST(Evaluate, UninformativeFeaturesScoreExactlyChance) {
  const std::vector<int> labels = balanced_labels(10);
  const auto m = matrix_from_values(std::vector<double>(labels.size(), 1.0));
  const auto plan = make_split_plan(labels, 3);
  ForestParams p;
  p.n_trees = 5;
  p.seed = 3;
  const auto report = evaluate(m, labels, plan, {p}, "flat");

  // constant features give every row the same score, so midrank AUC is 0.5
  for (int c = 0; c < 4; ++c) {
    ASSERT_TRUE(report.auc[c].has_value());
    for (const auto& fold : report.auc[c]->folds) {
      if (fold) EXPECT_DOUBLE_EQ(*fold, 0.5);
    }
    EXPECT_DOUBLE_EQ(report.auc[c]->mean, 0.5);
  }
}

TEST(Evaluate, RejectsPlansThatDoNotPartition) {
  const auto data = oracles::make_blobs(21, 10);
  auto plan = make_split_plan(data.labels, 21);

  auto tampered = plan;
  tampered.folds[0].push_back(tampered.folds[1][0]);  // duplicate coverage
  EXPECT_EQ(expect_error([&] {
              evaluate(data.features, data.labels, tampered, tiny_grid(21), "m");
            }),
            "plan_mismatch");

  tampered = plan;
  tampered.folds[2].pop_back();  // a row left uncovered
  EXPECT_EQ(expect_error([&] {
              evaluate(data.features, data.labels, tampered, tiny_grid(21), "m");
            }),
            "plan_mismatch");

  tampered = plan;
  tampered.tuning.back() = data.labels.size() + 5;  // out of range
  EXPECT_EQ(expect_error([&] {
              evaluate(data.features, data.labels, tampered, tiny_grid(21), "m");
            }),
            "plan_mismatch");

  EXPECT_EQ(expect_error([&] {
              evaluate(data.features, std::vector<int>(7, 1), plan, tiny_grid(21), "m");
            }),
            "eval_shape");
}

TEST(Evaluate, ReportRoundTripsThroughJson) {
  const auto data = oracles::make_blobs(5, 12);
  const auto plan = make_split_plan(data.labels, 5);
  const auto report = evaluate(data.features, data.labels, plan, tiny_grid(5), "rt");

  const auto j = report.to_json();
  EXPECT_FALSE(j.contains("timings"));  // wall time must not leak into artifacts
  EXPECT_EQ(j.dump().find("seconds"), std::string::npos);

  const auto parsed = parse_eval_report(j.dump(2));
  EXPECT_EQ(parsed.model_name, report.model_name);
  EXPECT_EQ(parsed.seed, report.seed);
  EXPECT_EQ(parsed.n_rows, report.n_rows);
  EXPECT_EQ(parsed.chosen_params, report.chosen_params);
  EXPECT_EQ(parsed.grid.best_objective, report.grid.best_objective);
  ASSERT_EQ(parsed.grid.trace.size(), report.grid.trace.size());
  for (std::size_t i = 0; i < parsed.grid.trace.size(); ++i) {
    EXPECT_EQ(parsed.grid.trace[i].ok, report.grid.trace[i].ok);
    EXPECT_EQ(parsed.grid.trace[i].objective, report.grid.trace[i].objective);
    EXPECT_EQ(parsed.grid.trace[i].params, report.grid.trace[i].params);
  }
  for (int c = 0; c < 4; ++c) {
    ASSERT_EQ(parsed.auc[c].has_value(), report.auc[c].has_value());
    if (!parsed.auc[c]) continue;
    EXPECT_EQ(parsed.auc[c]->folds, report.auc[c]->folds);
    EXPECT_EQ(parsed.auc[c]->mean, report.auc[c]->mean);
    EXPECT_EQ(parsed.auc[c]->stdev, report.auc[c]->stdev);
    EXPECT_EQ(parsed.auc[c]->n_folds, report.auc[c]->n_folds);
    EXPECT_EQ(parsed.aup[c]->folds, report.aup[c]->folds);
  }
  EXPECT_EQ(parsed.confusion, report.confusion);
  EXPECT_EQ(parsed.timings.grid_seconds, 0.0);

  // the serialized form itself is reproducible
  EXPECT_EQ(parsed.to_json().dump(), j.dump());

  EXPECT_EQ(expect_error([] { parse_eval_report("not json"); }), "report_json");
  EXPECT_EQ(expect_error([] { parse_eval_report("{}"); }), "report_json");
}

TEST(Evaluate, SummaryStatisticsOverPresentFolds) {
  using fproxkit::detail::summarize;
  EXPECT_FALSE(summarize({std::nullopt, std::nullopt}).has_value());

  const auto m = summarize({0.5, std::nullopt, 0.7, std::nullopt, std::nullopt});
  ASSERT_TRUE(m.has_value());
  EXPECT_EQ(m->n_folds, 2u);
  EXPECT_DOUBLE_EQ(m->mean, 0.6);
  EXPECT_NEAR(m->stdev, 0.1414213562373095, 1e-15);
  ASSERT_EQ(m->folds.size(), 5u);
  EXPECT_FALSE(m->folds[1].has_value());

  const auto single = summarize({std::nullopt, 0.9});
  ASSERT_TRUE(single.has_value());
  EXPECT_DOUBLE_EQ(single->mean, 0.9);
  EXPECT_DOUBLE_EQ(single->stdev, 0.0);  // undefined spread reported as zero
}
