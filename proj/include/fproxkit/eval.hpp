#pragma once

// Evaluation protocol: a stratified 20% tuning holdout plus five fixed
// stratified folds over the remainder; exhaustive hyperparameter grid search
// scored on an internal 80/20 split of the tuning set; per-class one-vs-rest
// ROC-AUC and average precision aggregated as mean +/- sample std over folds.
//
// All cell assignment is integer arithmetic (largest-remainder apportionment)
// over per-class shuffles seeded from (seed, class), so plans are identical
// across platforms and invariant to input row order up to relabeling of
// positions.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"
#include "fproxkit/forest.hpp"
#include "fproxkit/rng.hpp"

namespace fproxkit {

// ---------------------------------------------------------------------------
// split plan

struct SplitPlan {
  std::vector<std::size_t> tuning;
  std::array<std::vector<std::size_t>, 5> folds;  // disjoint test sets
  std::uint64_t seed = 0;

  bool operator==(const SplitPlan&) const = default;
};

namespace detail {

struct ClassBuckets {
  std::vector<int> classes;                    // ascending distinct labels
  std::vector<std::vector<std::size_t>> rows;  // per class: shuffled row indices
};

inline ClassBuckets shuffled_class_buckets(const std::vector<int>& labels, std::uint64_t seed,
                                           std::uint64_t salt) {
  ClassBuckets b;
  for (const int l : labels)
    if (std::find(b.classes.begin(), b.classes.end(), l) == b.classes.end())
      b.classes.push_back(l);
  std::sort(b.classes.begin(), b.classes.end());
  b.rows.resize(b.classes.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto c = std::find(b.classes.begin(), b.classes.end(), labels[i]) - b.classes.begin();
    b.rows[static_cast<std::size_t>(c)].push_back(i);
  }
  for (std::size_t c = 0; c < b.classes.size(); ++c) {
    rng::Engine g(rng::derive_seed(rng::derive_seed(seed, salt),
                                   static_cast<std::uint64_t>(b.classes[c])));
    rng::shuffle(b.rows[c], g);
  }
  return b;
}

// Rounded-20% per-class take counts: total = round(n/5), floor(n_c/5) each,
// leftovers to the largest per-class remainders (ties to the lower class).
inline std::vector<std::size_t> fifth_take_counts(const ClassBuckets& b, std::size_t n) {
  const std::size_t total = (2 * n + 5) / 10;
  const std::size_t k = b.classes.size();
  std::vector<std::size_t> take(k), rem(k);
  std::size_t base_sum = 0;
  for (std::size_t c = 0; c < k; ++c) {
    take[c] = b.rows[c].size() / 5;
    rem[c] = b.rows[c].size() % 5;
    base_sum += take[c];
  }
  std::vector<std::size_t> order(k);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t c) {
    if (rem[a] != rem[c]) return rem[a] > rem[c];
    return a < c;
  });
  for (std::size_t e = 0; total > base_sum + e; ++e) ++take[order[e % k]];
  return take;
}

}  // namespace detail

// Deterministic stratified plan: a rounded-20% tuning holdout, the remainder
// dealt per class into five folds (extras rotate their starting fold by class
// rank, so no fold is systematically larger). Every class needs >= 10 rows.
inline SplitPlan make_split_plan(const std::vector<int>& labels, std::uint64_t seed) {
  if (labels.empty()) fail("split_empty", "no labels to split");
  const auto buckets = detail::shuffled_class_buckets(labels, seed, /*salt=*/0);
  for (std::size_t c = 0; c < buckets.classes.size(); ++c)
    if (buckets.rows[c].size() < 10)
      fail("split_class", "class " + std::to_string(buckets.classes[c]) + " has " +
                              std::to_string(buckets.rows[c].size()) +
                              " rows; stratified splitting needs at least 10");

  SplitPlan plan;
  plan.seed = seed;
  const auto take = detail::fifth_take_counts(buckets, labels.size());
  for (std::size_t c = 0; c < buckets.classes.size(); ++c) {
    const auto& rows = buckets.rows[c];
    std::size_t next = 0;
    for (; next < take[c]; ++next) plan.tuning.push_back(rows[next]);
    const std::size_t rest = rows.size() - take[c];
    const std::size_t fb = rest / 5, extra = rest % 5, start = c % 5;
    for (std::size_t f = 0; f < 5; ++f) {
      std::size_t want = fb + ((f + 5 - start) % 5 < extra ? 1 : 0);
      for (; want > 0; --want, ++next) plan.folds[f].push_back(rows[next]);
    }
  }
  std::sort(plan.tuning.begin(), plan.tuning.end());
  for (auto& fold : plan.folds) std::sort(fold.begin(), fold.end());
  return plan;
}

// "id,cell" membership listing in matrix row order; cells are "tuning" and
// "fold0".."fold4".
inline std::string serialize_split_plan(const SplitPlan& plan,
                                        const std::vector<std::string>& row_ids) {
  std::vector<std::string> cell(row_ids.size());
  for (const std::size_t i : plan.tuning) cell.at(i) = "tuning";
  for (std::size_t f = 0; f < 5; ++f)
    for (const std::size_t i : plan.folds[f]) cell.at(i) = "fold" + std::to_string(f);
  std::string out;
  csv::write_row(out, {"id", "cell"});
  for (std::size_t i = 0; i < row_ids.size(); ++i) csv::write_row(out, {row_ids[i], cell[i]});
  return out;
}

// ---------------------------------------------------------------------------
// ranking metrics

// Mann-Whitney AUC with midrank handling of score ties; equals trapezoidal
// integration of the ROC curve.
inline double roc_auc_ovr(const std::vector<double>& scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) fail("metric_shape", "scores/labels length mismatch");
  std::size_t pos = 0;
  for (const bool b : positives) pos += b;
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0)
    fail("auc_degenerate", "AUC needs at least one positive and one negative");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    std::size_t tied_pos = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tied_pos += positives[order[j]];
      ++j;
    }
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    rank_sum_pos += midrank * static_cast<double>(tied_pos);
    i = j;
  }
  const double p = static_cast<double>(pos), n = static_cast<double>(neg);
  return (rank_sum_pos - p * (p + 1.0) / 2.0) / (p * n);
}

// Average precision: descending distinct-score blocks contribute
// (recall increment) x (precision after the block).
inline double pr_auc_ovr(const std::vector<double>& scores, const std::vector<bool>& positives) {
  if (scores.size() != positives.size()) fail("metric_shape", "scores/labels length mismatch");
  std::size_t pos = 0;
  for (const bool b : positives) pos += b;
  if (pos == 0) fail("aup_degenerate", "average precision needs at least one positive");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0;
  std::size_t seen = 0, tp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i, block_tp = 0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      block_tp += positives[order[j]];
      ++j;
    }
    seen += j - i;
    tp += block_tp;
    if (block_tp) {
      const double precision = static_cast<double>(tp) / static_cast<double>(seen);
      const double recall_inc = static_cast<double>(block_tp) / static_cast<double>(pos);
      ap += precision * recall_inc;
    }
    i = j;
  }
  return ap;
}

// ROC curve vertices (fpr, tpr), one per distinct threshold, from (0,0) to
// (1,1); trapezoidal area over these equals roc_auc_ovr.
inline std::vector<std::array<double, 2>> roc_points(const std::vector<double>& scores,
                                                     const std::vector<bool>& positives) {
  std::size_t pos = 0;
  for (const bool b : positives) pos += b;
  const std::size_t neg = scores.size() - pos;
  if (pos == 0 || neg == 0)
    fail("auc_degenerate", "ROC needs at least one positive and one negative");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::array<double, 2>> out = {{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      positives[order[j]] ? ++tp : ++fp;
      ++j;
    }
    out.push_back({static_cast<double>(fp) / static_cast<double>(neg),
                   static_cast<double>(tp) / static_cast<double>(pos)});
    i = j;
  }
  return out;
}

// Precision-recall vertices (recall, precision) per distinct threshold,
// prefixed with the conventional (0, 1) anchor.
inline std::vector<std::array<double, 2>> pr_points(const std::vector<double>& scores,
                                                    const std::vector<bool>& positives) {
  std::size_t pos = 0;
  for (const bool b : positives) pos += b;
  if (pos == 0) fail("aup_degenerate", "PR curve needs at least one positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<std::array<double, 2>> out = {{0.0, 1.0}};
  std::size_t tp = 0, seen = 0, i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      tp += positives[order[j]];
      ++j;
    }
    seen = j;
    out.push_back({static_cast<double>(tp) / static_cast<double>(pos),
                   static_cast<double>(tp) / static_cast<double>(seen)});
    i = j;
  }
  return out;
}

// ---------------------------------------------------------------------------
// matrix subsetting

inline FeatureMatrix subset(const FeatureMatrix& m, const std::vector<std::size_t>& indices) {
  FeatureMatrix out;
  out.schema = m.schema;
  out.rows.reserve(indices.size());
  for (const std::size_t i : indices) {
    out.rows.push_back(m.rows.at(i));
    if (!m.row_ids.empty()) out.row_ids.push_back(m.row_ids.at(i));
  }
  return out;
}

template <typename T>
std::vector<T> subset(const std::vector<T>& v, const std::vector<std::size_t>& indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (const std::size_t i : indices) out.push_back(v.at(i));
  return out;
}

// ---------------------------------------------------------------------------
// grid search

using ParamGrid = std::vector<ForestParams>;

// n_trees {100, 300} x max_depth {10, 20, unbounded} x min_samples_leaf
// {1, 5}, in that nesting order.
inline ParamGrid default_grid(std::uint64_t seed) {
  ParamGrid grid;
  for (const std::size_t n_trees : {100, 300})
    for (const std::size_t max_depth : {10, 20, 0})
      for (const std::size_t msl : {1, 5}) {
        ForestParams p;
        p.n_trees = n_trees;
        p.max_depth = max_depth;
        p.min_samples_leaf = msl;
        p.seed = seed;
        grid.push_back(p);
      }
  return grid;
}

struct GridTraceEntry {
  ForestParams params;
  bool ok = false;
  std::string error;       // failure reason when not ok
  double objective = 0.0;  // mean one-vs-rest AUC on the validation slice
};

struct GridSearchResult {
  ForestParams best;
  double best_objective = 0.0;
  std::vector<GridTraceEntry> trace;  // grid declaration order
};

// Exhaustive search over the grid, scored by mean one-vs-rest AUC on an
// internal stratified 80/20 split of the tuning rows. Invalid parameter sets
// abort before any training; configurations that fail to train are recorded
// and skipped; ties keep the earliest grid entry.
inline GridSearchResult grid_search(const FeatureMatrix& tuning_features,
                                    const std::vector<int>& tuning_labels, const ParamGrid& grid,
                                    std::uint64_t seed, int threads = 1) {
  if (grid.empty()) fail("grid_empty", "hyperparameter grid is empty");
  if (tuning_features.n_rows() != tuning_labels.size())
    fail("eval_shape", "tuning features/labels length mismatch");
  for (const auto& p : grid) validated_params(p, tuning_features.n_features());

  const auto buckets = detail::shuffled_class_buckets(tuning_labels, seed, /*salt=*/1);
  const auto take = detail::fifth_take_counts(buckets, tuning_labels.size());
  std::vector<std::size_t> val_idx, train_idx;
  for (std::size_t c = 0; c < buckets.classes.size(); ++c) {
    for (std::size_t i = 0; i < buckets.rows[c].size(); ++i)
      (i < take[c] ? val_idx : train_idx).push_back(buckets.rows[c][i]);
  }
  std::sort(val_idx.begin(), val_idx.end());
  std::sort(train_idx.begin(), train_idx.end());
  const auto train_features = subset(tuning_features, train_idx);
  const auto train_labels = subset(tuning_labels, train_idx);
  const auto val_features = subset(tuning_features, val_idx);
  const auto val_labels = subset(tuning_labels, val_idx);

  GridSearchResult out;
  bool has_best = false;
  for (const auto& params : grid) {
    GridTraceEntry entry;
    entry.params = params;
    try {
      const auto model = train(train_features, train_labels, params, threads);
      const auto probs = predict_proba(model, val_features, threads);
      double sum = 0.0;
      int classes_scored = 0;
      for (int cls = 1; cls <= kClassCount; ++cls) {
        std::vector<double> scores(probs.size());
        std::vector<bool> positives(probs.size());
        std::size_t pos = 0;
        for (std::size_t i = 0; i < probs.size(); ++i) {
          scores[i] = probs[i].p[cls - 1];
          positives[i] = val_labels[i] == cls;
          pos += positives[i];
        }
        if (pos == 0 || pos == probs.size()) continue;
        sum += roc_auc_ovr(scores, positives);
        ++classes_scored;
      }
      if (classes_scored == 0) fail("grid_objective", "no class has both outcomes in validation");
      entry.ok = true;
      entry.objective = sum / classes_scored;
      if (!has_best || entry.objective > out.best_objective) {
        has_best = true;
        out.best = params;
        out.best_objective = entry.objective;
      }
    } catch (const Error& e) {
      entry.error = e.code() + std::string(": ") + e.what();
    }
    out.trace.push_back(std::move(entry));
  }
  if (!has_best) fail("grid_all_failed", "every grid configuration failed");
  return out;
}

// ---------------------------------------------------------------------------
// cross-validated evaluation

struct ClassMetric {
  std::vector<std::optional<double>> folds;  // one entry per fold; absent if unevaluable
  double mean = 0.0;
  double stdev = 0.0;  // sample (n-1) over present folds; 0 when < 2 present
  std::size_t n_folds = 0;
};

struct PhaseTimings {
  double grid_seconds = 0.0;
  double folds_seconds = 0.0;
};

struct EvalReport {
  std::string model_name;
  std::uint64_t seed = 0;
  std::size_t n_rows = 0;
  ForestParams chosen_params;
  GridSearchResult grid;
  std::array<std::optional<ClassMetric>, 4> auc;  // classes 1..4
  std::array<std::optional<ClassMetric>, 4> aup;
  std::vector<std::array<std::array<std::size_t, 4>, 4>> confusion;  // per fold [true][pred]
  PhaseTimings timings;  // excluded from to_json(); report files must be reproducible

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["model"] = model_name;
    j["seed"] = seed;
    j["n_rows"] = n_rows;
    j["chosen_params"] = params_to_json(chosen_params);
    auto trace = nlohmann::json::array();
    for (const auto& e : grid.trace) {
      nlohmann::json t;
      t["params"] = params_to_json(e.params);
      if (e.ok)
        t["objective"] = e.objective;
      else
        t["error"] = e.error;
      trace.push_back(std::move(t));
    }
    j["grid_trace"] = std::move(trace);
    j["grid_objective"] = grid.best_objective;
    auto metric_block = [](const std::array<std::optional<ClassMetric>, 4>& metrics) {
      nlohmann::json block = nlohmann::json::object();
      for (int c = 0; c < kClassCount; ++c) {
        if (!metrics[c]) continue;
        nlohmann::json m;
        auto folds = nlohmann::json::array();
        for (const auto& f : metrics[c]->folds)
          folds.push_back(f ? nlohmann::json(*f) : nlohmann::json(nullptr));
        m["folds"] = std::move(folds);
        m["mean"] = metrics[c]->mean;
        m["std"] = metrics[c]->stdev;
        block["class" + std::to_string(c + 1)] = std::move(m);
      }
      return block;
    };
    j["auc"] = metric_block(auc);
    j["aup"] = metric_block(aup);
    auto conf = nlohmann::json::array();
    for (const auto& fold : confusion) conf.push_back(fold);
    j["confusion_per_fold"] = std::move(conf);
    return j;
  }
};

// Rebuilds a report from its to_json() form (timings are not serialized and
// come back zeroed).
inline EvalReport parse_eval_report(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail("report_json", std::string("evaluation report is not valid JSON: ") + e.what());
  }
  try {
    EvalReport r;
    r.model_name = j.at("model").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.n_rows = j.at("n_rows").get<std::size_t>();
    r.chosen_params = params_from_json(j.at("chosen_params"));
    r.grid.best = r.chosen_params;
    r.grid.best_objective = j.at("grid_objective").get<double>();
    for (const auto& t : j.at("grid_trace")) {
      GridTraceEntry e;
      e.params = params_from_json(t.at("params"));
      if (t.contains("objective")) {
        e.ok = true;
        e.objective = t.at("objective").get<double>();
      } else {
        e.error = t.at("error").get<std::string>();
      }
      r.grid.trace.push_back(std::move(e));
    }
    auto metric_block = [&](const char* key, std::array<std::optional<ClassMetric>, 4>& out) {
      const auto& block = j.at(key);
      for (int c = 0; c < kClassCount; ++c) {
        const std::string name = "class" + std::to_string(c + 1);
        if (!block.contains(name)) continue;
        ClassMetric m;
        for (const auto& f : block.at(name).at("folds")) {
          m.folds.push_back(f.is_null() ? std::nullopt
                                        : std::optional<double>(f.get<double>()));
          m.n_folds += !f.is_null();
        }
        m.mean = block.at(name).at("mean").get<double>();
        m.stdev = block.at(name).at("std").get<double>();
        out[c] = std::move(m);
      }
    };
    metric_block("auc", r.auc);
    metric_block("aup", r.aup);
    for (const auto& fold : j.at("confusion_per_fold"))
      r.confusion.push_back(fold.get<std::array<std::array<std::size_t, 4>, 4>>());
    return r;
  } catch (const nlohmann::json::exception& e) {
    fail("report_json", std::string("malformed evaluation report: ") + e.what());
  }
}

namespace detail {

inline std::optional<ClassMetric> summarize(std::vector<std::optional<double>> folds) {
  ClassMetric m;
  m.folds = std::move(folds);
  std::vector<double> present;
  for (const auto& f : m.folds)
    if (f) present.push_back(*f);
  if (present.empty()) return std::nullopt;
  m.n_folds = present.size();
  double sum = 0.0;
  for (const double v : present) sum += v;
  m.mean = sum / static_cast<double>(present.size());
  if (present.size() >= 2) {
    double ss = 0.0;
    for (const double v : present) ss += (v - m.mean) * (v - m.mean);
    m.stdev = std::sqrt(ss / static_cast<double>(present.size() - 1));
  }
  return m;
}

}  // namespace detail

// Tunes on the holdout, then for each fold trains on the other four folds
// (tuning rows never re-enter) and scores that fold's rows.
inline EvalReport evaluate(const FeatureMatrix& features, const std::vector<int>& labels,
                           const SplitPlan& plan, const ParamGrid& grid,
                           const std::string& model_name, int threads = 1) {
  const std::size_t n = features.n_rows();
  if (labels.size() != n) fail("eval_shape", "features/labels length mismatch");
  std::vector<bool> seen(n, false);
  auto mark = [&](const std::vector<std::size_t>& cell) {
    for (const std::size_t i : cell) {
      if (i >= n || seen[i]) fail("plan_mismatch", "split plan does not partition the rows");
      seen[i] = true;
    }
  };
  mark(plan.tuning);
  for (const auto& fold : plan.folds) mark(fold);
  if (std::find(seen.begin(), seen.end(), false) != seen.end())
    fail("plan_mismatch", "split plan does not cover every row");

  EvalReport report;
  report.model_name = model_name;
  report.seed = plan.seed;
  report.n_rows = n;

  const auto t0 = std::chrono::steady_clock::now();
  report.grid = grid_search(subset(features, plan.tuning), subset(labels, plan.tuning), grid,
                            plan.seed, threads);
  report.chosen_params = report.grid.best;
  const auto t1 = std::chrono::steady_clock::now();

  std::array<std::vector<std::optional<double>>, 4> auc_folds, aup_folds;
  for (int c = 0; c < kClassCount; ++c) {
    auc_folds[c].resize(5);
    aup_folds[c].resize(5);
  }
  for (std::size_t k = 0; k < 5; ++k) {
    std::vector<std::size_t> train_idx;
    for (std::size_t f = 0; f < 5; ++f)
      if (f != k) train_idx.insert(train_idx.end(), plan.folds[f].begin(), plan.folds[f].end());
    std::sort(train_idx.begin(), train_idx.end());

    const auto model = train(subset(features, train_idx), subset(labels, train_idx),
                             report.chosen_params, threads);
    const auto test_features = subset(features, plan.folds[k]);
    const auto test_labels = subset(labels, plan.folds[k]);
    const auto probs = predict_proba(model, test_features, threads);

    std::array<std::array<std::size_t, 4>, 4> conf{};
    for (std::size_t i = 0; i < probs.size(); ++i) {
      const int truth = test_labels[i];
      if (truth >= 1 && truth <= 4) ++conf[truth - 1][predict_class(probs[i]) - 1];
    }
    report.confusion.push_back(conf);

    for (int cls = 1; cls <= kClassCount; ++cls) {
      std::vector<double> scores(probs.size());
      std::vector<bool> positives(probs.size());
      std::size_t pos = 0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        scores[i] = probs[i].p[cls - 1];
        positives[i] = test_labels[i] == cls;
        pos += positives[i];
      }
      if (pos > 0 && pos < probs.size())
        auc_folds[cls - 1][k] = roc_auc_ovr(scores, positives);
      if (pos > 0) aup_folds[cls - 1][k] = pr_auc_ovr(scores, positives);
    }
  }
  const auto t2 = std::chrono::steady_clock::now();
  for (int c = 0; c < kClassCount; ++c) {
    report.auc[c] = detail::summarize(std::move(auc_folds[c]));
    report.aup[c] = detail::summarize(std::move(aup_folds[c]));
  }
  report.timings.grid_seconds = std::chrono::duration<double>(t1 - t0).count();
  report.timings.folds_seconds = std::chrono::duration<double>(t2 - t1).count();
  return report;
}

}  // namespace fproxkit
