#pragma once

// Deterministic multi-class random forest over 4 label classes.
//
// Determinism contract: (data, params) fully determine the model. Each tree
// seeds its own engine as seed XOR tree_index, so parallel training cannot
// reorder draws; rows are canonically sorted by id before bootstrapping, so
// input file order is irrelevant; split selection compares candidate quality
// in exact integer arithmetic (no floating-point accumulation), so results
// cannot vary with compiler flags or summation order.
//
// Split criterion: Gini impurity decrease. For a node with class counts c and
// size m, the weighted child impurity is minimized by maximizing
//   Q = ssq_l/m_l + ssq_r/m_r,   ssq = sum of squared class counts.
// Candidates are compared by cross-multiplication in unsigned 128-bit
// arithmetic; a split is accepted only when Q strictly exceeds the parent's
// ssq_p/m (a strict impurity decrease).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fproxkit/error.hpp"
#include "fproxkit/parallel.hpp"
#include "fproxkit/rng.hpp"

namespace fproxkit {

inline constexpr int kClassCount = 4;  // label classes 1..4

struct FeatureColumn {
  std::string name;
  std::string unit;

  bool operator==(const FeatureColumn&) const = default;
};

struct FeatureMatrix {
  std::vector<FeatureColumn> schema;
  std::vector<std::string> row_ids;  // optional; enables canonical row ordering
  std::vector<std::vector<std::optional<double>>> rows;  // missing is explicit

  std::size_t n_rows() const { return rows.size(); }
  std::size_t n_features() const { return schema.size(); }

  void validate() const {
    if (!row_ids.empty() && row_ids.size() != rows.size())
      fail("matrix_shape", "row_ids length does not match row count");
    for (std::size_t r = 0; r < rows.size(); ++r) {
      if (rows[r].size() != schema.size())
        fail("matrix_shape", "row " + std::to_string(r) + " has " +
                                 std::to_string(rows[r].size()) + " cells, schema has " +
                                 std::to_string(schema.size()));
      for (std::size_t f = 0; f < rows[r].size(); ++f)
        if (rows[r][f] && std::isnan(*rows[r][f]))
          fail("matrix_nan", "row " + std::to_string(r) + ", feature '" + schema[f].name +
                                 "': NaN stored; missing values must be left unset");
    }
  }
};

struct ForestParams {
  std::size_t n_trees = 100;
  std::size_t max_depth = 0;           // 0 = unbounded
  std::size_t min_samples_leaf = 1;
  std::size_t features_per_split = 0;  // 0 = ceil(sqrt(n_features))
  std::uint64_t seed = 0;

  bool operator==(const ForestParams&) const = default;
};

// Resolves the feature-subsample default and checks ranges.
inline ForestParams validated_params(ForestParams params, std::size_t n_features) {
  if (params.n_trees < 1) fail("forest_params", "n_trees must be >= 1");
  if (params.min_samples_leaf < 1) fail("forest_params", "min_samples_leaf must be >= 1");
  if (params.features_per_split == 0) {
    std::size_t k = static_cast<std::size_t>(std::sqrt(static_cast<double>(n_features)));
    while (k * k < n_features) ++k;
    params.features_per_split = k == 0 ? 1 : k;
  }
  if (params.features_per_split > n_features)
    fail("forest_params", "features_per_split " + std::to_string(params.features_per_split) +
                              " exceeds feature count " + std::to_string(n_features));
  return params;
}

struct NovaProbabilities {
  std::array<double, 4> p{};  // classes 1..4

  double p1() const { return p[0]; }
  double p2() const { return p[1]; }
  double p3() const { return p[2]; }
  double p4() const { return p[3]; }

  bool operator==(const NovaProbabilities&) const = default;

  void validate() const {
    double sum = 0.0;
    for (const double v : p) {
      if (!(v >= 0.0 && v <= 1.0)) fail("simplex", "probability outside [0, 1]");
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) fail("simplex", "probabilities do not sum to 1");
  }
};

// Highest-probability class; exact ties resolve to the lowest class.
inline int predict_class(const NovaProbabilities& probs) {
  int cls = 1;
  for (int c = 1; c < kClassCount; ++c)
    if (probs.p[c] > probs.p[cls - 1]) cls = c + 1;
  return cls;
}

struct TreeNode {
  std::int32_t feature = -1;  // -1 marks a leaf
  std::int32_t left = -1;
  std::int32_t right = -1;
  double threshold = 0.0;                // go left when value <= threshold
  std::array<std::uint32_t, 4> counts{};  // leaf: bootstrap class counts

  bool is_leaf() const { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

using Tree = std::vector<TreeNode>;

struct ForestModel {
  ForestParams params;  // as trained (features_per_split resolved)
  std::vector<FeatureColumn> schema;
  std::vector<double> medians;  // per-feature training median, imputation value
  bool degenerate = false;      // trained on a single label class
  std::size_t n_training_rows = 0;
  std::vector<Tree> trees;

  bool operator==(const ForestModel&) const = default;
};

// ---------------------------------------------------------------------------
// training

namespace detail {

inline Tree grow_tree(const std::vector<std::vector<double>>& cols,
                      const std::vector<std::uint8_t>& y, std::size_t n,
                      const ForestParams& params, std::size_t tree_index) {
  rng::Engine g(params.seed ^ static_cast<std::uint64_t>(tree_index));
  const std::size_t d = cols.size();
  const std::size_t msl = params.min_samples_leaf;

  std::vector<std::uint32_t> idx(n);
  for (std::size_t i = 0; i < n; ++i)
    idx[i] = static_cast<std::uint32_t>(rng::uniform_index(g, n));

  Tree tree;
  struct Work {
    std::uint32_t begin, end, depth;
    std::int32_t parent;
    bool is_right;
  };
  std::vector<Work> stack;
  stack.push_back({0, static_cast<std::uint32_t>(n), 0, -1, false});
  std::vector<std::pair<double, std::uint8_t>> vals;  // (feature value, class)

  while (!stack.empty()) {
    const Work w = stack.back();
    stack.pop_back();
    const std::int32_t me = static_cast<std::int32_t>(tree.size());
    tree.emplace_back();
    if (w.parent >= 0) (w.is_right ? tree[w.parent].right : tree[w.parent].left) = me;

    const std::size_t m = w.end - w.begin;
    std::array<std::uint64_t, 4> cnt{};
    for (std::uint32_t i = w.begin; i < w.end; ++i) ++cnt[y[idx[i]]];
    for (int c = 0; c < kClassCount; ++c)
      tree[me].counts[c] = static_cast<std::uint32_t>(cnt[c]);

    int present = 0;
    std::uint64_t ssq_p = 0;
    for (const std::uint64_t c : cnt) {
      if (c) ++present;
      ssq_p += c * c;
    }
    const bool depth_stop = params.max_depth != 0 && w.depth >= params.max_depth;
    if (present <= 1 || depth_stop || m < 2 * msl) continue;  // leaf

    // best split over a per-node feature subsample, ascending feature order;
    // strict-greater replacement keeps the lowest feature / lowest threshold
    // on quality ties
    auto feats = rng::sample_without_replacement(g, d, params.features_per_split);
    std::sort(feats.begin(), feats.end());
    bool has_best = false;
    std::uint64_t best_num = 0, best_den = 1;
    std::size_t best_feature = 0;
    double best_threshold = 0.0;

    for (const std::size_t f : feats) {
      const auto& col = cols[f];
      vals.clear();
      for (std::uint32_t i = w.begin; i < w.end; ++i) {
        const std::uint32_t r = idx[i];
        vals.emplace_back(col[r], y[r]);
      }
      std::sort(vals.begin(), vals.end());
      if (vals.front().first == vals.back().first) continue;  // constant feature

      std::array<std::uint64_t, 4> cl{}, cr = cnt;
      std::uint64_t ssq_l = 0, ssq_r = ssq_p;
      for (std::size_t k = 1; k < m; ++k) {
        const std::uint8_t c = vals[k - 1].second;
        ssq_l += 2 * cl[c] + 1;
        ++cl[c];
        ssq_r -= 2 * cr[c] - 1;
        --cr[c];
        if (!(vals[k - 1].first < vals[k].first)) continue;
        if (k < msl || m - k < msl) continue;
        const std::uint64_t nl = k, nr = m - k;
        const std::uint64_t num = ssq_l * nr + ssq_r * nl;  // <= m^3/4
        const std::uint64_t den = nl * nr;
        using u128 = unsigned __int128;
        if (!(static_cast<u128>(num) * m > static_cast<u128>(ssq_p) * den))
          continue;  // no strict impurity decrease
        if (has_best && !(static_cast<u128>(num) * best_den > static_cast<u128>(best_num) * den))
          continue;
        double thr = vals[k - 1].first + (vals[k].first - vals[k - 1].first) / 2.0;
        if (!(thr < vals[k].first)) thr = vals[k - 1].first;  // rounding guard
        has_best = true;
        best_num = num;
        best_den = den;
        best_feature = f;
        best_threshold = thr;
      }
    }
    if (!has_best) continue;  // leaf

    const auto& col = cols[best_feature];
    const auto mid_it =
        std::partition(idx.begin() + w.begin, idx.begin() + w.end,
                       [&](std::uint32_t r) { return col[r] <= best_threshold; });
    const auto mid = static_cast<std::uint32_t>(mid_it - idx.begin());
    tree[me].feature = static_cast<std::int32_t>(best_feature);
    tree[me].threshold = best_threshold;
    tree[me].counts = {};  // counts are meaningful (and serialized) only on leaves
    stack.push_back({mid, w.end, w.depth + 1, me, true});
    stack.push_back({w.begin, mid, w.depth + 1, me, false});  // popped first: preorder
  }
  return tree;
}

}  // namespace detail

inline ForestModel train(const FeatureMatrix& features, const std::vector<int>& labels,
                         const ForestParams& params_in, int threads = 1) {
  features.validate();
  const std::size_t n = features.n_rows();
  const std::size_t d = features.n_features();
  if (n == 0 || d == 0) fail("train_empty", "training matrix has no rows or no features");
  if (labels.size() != n)
    fail("train_shape", "label count " + std::to_string(labels.size()) +
                            " does not match row count " + std::to_string(n));
  const ForestParams params = validated_params(params_in, d);
  if (n < 2 * params.min_samples_leaf)
    fail("train_small", "need at least 2 x min_samples_leaf = " +
                            std::to_string(2 * params.min_samples_leaf) + " rows, got " +
                            std::to_string(n));
  std::array<bool, 4> seen{};
  for (const int l : labels) {
    if (l < 1 || l > kClassCount)
      fail("train_labels", "label " + std::to_string(l) + " outside 1..4");
    seen[l - 1] = true;
  }

  // canonical row order: by id when ids travel with the matrix
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (!features.row_ids.empty())
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return features.row_ids[a] < features.row_ids[b];
    });

  ForestModel model;
  model.params = params;
  model.schema = features.schema;
  model.degenerate = std::count(seen.begin(), seen.end(), true) < 2;
  model.n_training_rows = n;

  // per-feature medians over present values, then a dense imputed copy
  model.medians.resize(d);
  std::vector<double> buf;
  for (std::size_t f = 0; f < d; ++f) {
    buf.clear();
    for (const auto& row : features.rows)
      if (row[f]) buf.push_back(*row[f]);
    if (buf.empty())
      fail("train_missing",
           "feature '" + features.schema[f].name + "' has no present training values");
    std::sort(buf.begin(), buf.end());
    const std::size_t h = buf.size() / 2;
    model.medians[f] = buf.size() % 2 ? buf[h] : buf[h - 1] + (buf[h] - buf[h - 1]) / 2.0;
  }
  std::vector<std::vector<double>> cols(d, std::vector<double>(n));
  std::vector<std::uint8_t> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& row = features.rows[order[i]];
    for (std::size_t f = 0; f < d; ++f) cols[f][i] = row[f] ? *row[f] : model.medians[f];
    y[i] = static_cast<std::uint8_t>(labels[order[i]] - 1);
  }

  model.trees.resize(params.n_trees);
  parallel_for(params.n_trees, threads, [&](std::size_t t) {
    model.trees[t] = detail::grow_tree(cols, y, n, params, t);
  });
  return model;
}

// ---------------------------------------------------------------------------
// prediction

inline void check_schema(const ForestModel& model, const FeatureMatrix& features) {
  if (features.schema.size() != model.schema.size())
    fail("schema", "matrix has " + std::to_string(features.schema.size()) +
                       " features, model expects " + std::to_string(model.schema.size()));
  for (std::size_t f = 0; f < model.schema.size(); ++f)
    if (!(features.schema[f] == model.schema[f]))
      fail("schema", "feature " + std::to_string(f) + ": model expects '" +
                         model.schema[f].name + "' (" + model.schema[f].unit + "), matrix has '" +
                         features.schema[f].name + "' (" + features.schema[f].unit + ")");
}

namespace detail {

inline NovaProbabilities predict_imputed(const ForestModel& model, const double* x) {
  NovaProbabilities out;
  for (const auto& tree : model.trees) {
    std::size_t i = 0;
    while (!tree[i].is_leaf())
      i = static_cast<std::size_t>(x[tree[i].feature] <= tree[i].threshold ? tree[i].left
                                                                           : tree[i].right);
    double total = 0.0;
    for (const std::uint32_t c : tree[i].counts) total += c;
    for (int c = 0; c < kClassCount; ++c) out.p[c] += tree[i].counts[c] / total;
  }
  for (int c = 0; c < kClassCount; ++c) out.p[c] /= static_cast<double>(model.trees.size());
  return out;
}

}  // namespace detail

// Single ragged row; missing cells are imputed with the stored medians.
inline NovaProbabilities predict_proba(const ForestModel& model,
                                       const std::vector<std::optional<double>>& row) {
  if (row.size() != model.schema.size())
    fail("schema", "row has " + std::to_string(row.size()) + " cells, model expects " +
                       std::to_string(model.schema.size()));
  std::vector<double> x(row.size());
  for (std::size_t f = 0; f < row.size(); ++f) {
    if (row[f] && std::isnan(*row[f]))
      fail("matrix_nan", "feature '" + model.schema[f].name + "' is NaN");
    x[f] = row[f] ? *row[f] : model.medians[f];
  }
  return detail::predict_imputed(model, x.data());
}

inline std::vector<NovaProbabilities> predict_proba(const ForestModel& model,
                                                    const FeatureMatrix& features,
                                                    int threads = 1) {
  check_schema(model, features);
  features.validate();
  std::vector<NovaProbabilities> out(features.n_rows());
  const std::size_t d = model.schema.size();
  parallel_for(features.n_rows(), threads, [&](std::size_t r) {
    std::vector<double> x(d);
    for (std::size_t f = 0; f < d; ++f) {
      const auto& cell = features.rows[r][f];
      x[f] = cell ? *cell : model.medians[f];
    }
    out[r] = detail::predict_imputed(model, x.data());
  });
  return out;
}

// ---------------------------------------------------------------------------
// serialization (versioned JSON; object keys serialize alphabetically, doubles
// as shortest round-trip forms, so equal models produce identical bytes)

inline constexpr const char* kModelFormat = "fproxkit-forest";
inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json params_to_json(const ForestParams& p) {
  return {{"n_trees", p.n_trees},
          {"max_depth", p.max_depth},
          {"min_samples_leaf", p.min_samples_leaf},
          {"features_per_split", p.features_per_split},
          {"seed", p.seed}};
}

inline ForestParams params_from_json(const nlohmann::json& j) {
  ForestParams p;
  p.n_trees = j.at("n_trees").get<std::size_t>();
  p.max_depth = j.at("max_depth").get<std::size_t>();
  p.min_samples_leaf = j.at("min_samples_leaf").get<std::size_t>();
  p.features_per_split = j.at("features_per_split").get<std::size_t>();
  p.seed = j.at("seed").get<std::uint64_t>();
  return p;
}

inline std::string serialize_model(const ForestModel& model) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["format_version"] = kModelFormatVersion;
  j["params"] = params_to_json(model.params);
  auto schema = nlohmann::json::array();
  for (const auto& col : model.schema) schema.push_back({{"name", col.name}, {"unit", col.unit}});
  j["schema"] = std::move(schema);
  j["medians"] = model.medians;
  j["degenerate"] = model.degenerate;
  j["n_training_rows"] = model.n_training_rows;
  j["classes"] = {1, 2, 3, 4};
  auto trees = nlohmann::json::array();
  for (const auto& tree : model.trees) {
    auto nodes = nlohmann::json::array();
    for (const auto& node : tree) {
      if (node.is_leaf())
        nodes.push_back({{"counts", node.counts}});
      else
        nodes.push_back({{"feature", node.feature},
                         {"threshold", node.threshold},
                         {"left", node.left},
                         {"right", node.right}});
    }
    trees.push_back(std::move(nodes));
  }
  j["trees"] = std::move(trees);
  return j.dump();
}

inline ForestModel parse_model(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail("model_json", std::string("model file is not valid JSON: ") + e.what());
  }
  try {
    if (!j.is_object() || j.value("format", "") != kModelFormat)
      fail("model_format", "not a forest model file");
    if (j.value("format_version", -1) != kModelFormatVersion)
      fail("model_version", "unsupported model format_version (expected " +
                                std::to_string(kModelFormatVersion) + ")");
    ForestModel m;
    m.params = params_from_json(j.at("params"));
    for (const auto& col : j.at("schema"))
      m.schema.push_back({col.at("name").get<std::string>(), col.at("unit").get<std::string>()});
    m.medians = j.at("medians").get<std::vector<double>>();
    m.degenerate = j.at("degenerate").get<bool>();
    m.n_training_rows = j.at("n_training_rows").get<std::size_t>();
    if (j.at("classes") != nlohmann::json({1, 2, 3, 4}))
      fail("model_format", "unsupported class set");
    const std::size_t d = m.schema.size();
    if (d == 0 || m.medians.size() != d)
      fail("model_format", "schema and medians are inconsistent");
    validated_params(m.params, d);
    for (const auto& tj : j.at("trees")) {
      Tree tree;
      const auto n_nodes = static_cast<std::int64_t>(tj.size());
      for (const auto& nj : tj) {
        TreeNode node;
        if (nj.contains("counts")) {
          const auto counts = nj.at("counts").get<std::vector<std::uint32_t>>();
          if (counts.size() != 4) fail("model_format", "leaf counts must have 4 entries");
          std::uint64_t sum = 0;
          for (int c = 0; c < kClassCount; ++c) {
            node.counts[c] = counts[c];
            sum += counts[c];
          }
          if (sum == 0) fail("model_format", "leaf with empty counts");
        } else {
          node.feature = nj.at("feature").get<std::int32_t>();
          node.threshold = nj.at("threshold").get<double>();
          node.left = nj.at("left").get<std::int32_t>();
          node.right = nj.at("right").get<std::int32_t>();
          if (node.feature < 0 || static_cast<std::size_t>(node.feature) >= d)
            fail("model_format", "split feature index out of range");
          if (node.left <= 0 || node.right <= 0 || node.left >= n_nodes || node.right >= n_nodes)
            fail("model_format", "split child index out of range");
          if (std::isnan(node.threshold)) fail("model_format", "split threshold is NaN");
        }
        tree.push_back(node);
      }
      if (tree.empty()) fail("model_format", "empty tree");
      m.trees.push_back(std::move(tree));
    }
    if (m.trees.size() != m.params.n_trees)
      fail("model_format", "tree count does not match params.n_trees");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail("model_format", std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const ForestModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("model_io", "cannot open for writing: " + path);
  const std::string text = serialize_model(model);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.put('\n');
  if (!out) fail("model_io", "write failed: " + path);
}

inline ForestModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("model_io", "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

}  // namespace fproxkit
