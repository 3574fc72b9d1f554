#pragma once

// Continuous processing score derived from the 4-class probability vector:
//   score = (1 - p1 + p4) / 2
// i.e. the normalized position of the vector along the axis from the class-1
// vertex to the class-4 vertex; 0 at pure class 1, 1 at pure class 4, and
// indifferent to how mass is split between classes 2 and 3. Inputs must lie
// on the probability simplex; off-simplex vectors are rejected, not projected.
//
// The decision-space helper mean-centers the probability matrix and projects
// it onto the top two principal axes of its covariance (exact 4x4 cyclic
// Jacobi eigensolver; no external linear algebra).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "fproxkit/error.hpp"
#include "fproxkit/forest.hpp"
#include "fproxkit/parallel.hpp"

namespace fproxkit {

inline double fpro(const NovaProbabilities& probs) {
  probs.validate();
  return (1.0 - probs.p1() + probs.p4()) / 2.0;
}

struct FProEntry {
  std::string id;
  NovaProbabilities probs;
  double score = 0.0;
};

struct FProReject {
  std::size_t row = 0;  // 0-based matrix row
  std::string id;
  std::string reason;
};

struct FProRanking {
  std::vector<FProEntry> entries;  // score descending, ties by id ascending
  std::vector<FProReject> rejects;
};

// Scores every row and ranks the scorable ones. Bad individual rows (wrong
// width, NaN cells) are reported in `rejects` instead of aborting the batch;
// a schema that disagrees with the model aborts outright.
inline FProRanking rank_by_fpro(const ForestModel& model, const FeatureMatrix& features,
                                int threads = 1) {
  check_schema(model, features);
  if (features.row_ids.size() != features.n_rows())
    fail("rank_ids", "feature matrix must carry one row id per row");

  const std::size_t n = features.n_rows();
  std::vector<std::optional<FProEntry>> scored(n);
  std::vector<std::optional<FProReject>> failed(n);
  parallel_for(n, threads, [&](std::size_t r) {
    try {
      FProEntry e;
      e.id = features.row_ids[r];
      e.probs = predict_proba(model, features.rows[r]);
      e.score = fpro(e.probs);
      scored[r] = std::move(e);
    } catch (const Error& err) {
      failed[r] = FProReject{r, features.row_ids[r], err.code()};
    }
  });

  FProRanking out;
  for (std::size_t r = 0; r < n; ++r) {
    if (scored[r]) out.entries.push_back(std::move(*scored[r]));
    if (failed[r]) out.rejects.push_back(std::move(*failed[r]));
  }
  std::sort(out.entries.begin(), out.entries.end(), [](const FProEntry& a, const FProEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  });
  return out;
}

// ---------------------------------------------------------------------------
// decision-space PCA

struct DecisionSpaceCoords {
  std::vector<std::array<double, 2>> coords;   // per input row: (pc1, pc2)
  std::array<double, 2> explained{};           // variance fractions, non-increasing
  std::array<std::array<double, 4>, 2> axes{};  // the two principal directions
};

namespace detail {

// Cyclic Jacobi for a symmetric 4x4 matrix: a is destroyed, eigenvalues land
// on its diagonal, v accumulates the rotations (columns = eigenvectors).
inline void jacobi4(std::array<std::array<double, 4>, 4>& a, std::array<double, 4>& w,
                    std::array<std::array<double, 4>, 4>& v) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) v[i][j] = i == j ? 1.0 : 0.0;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (a[p][q] == 0.0) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (int k = 0; k < 4; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 4; ++k) {
          const double vkp = v[k][p], vkq = v[k][q];
          v[k][p] = c * vkp - s * vkq;
          v[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (int i = 0; i < 4; ++i) w[i] = a[i][i];
}

}  // namespace detail

inline DecisionSpaceCoords pca_decision_space(const std::vector<NovaProbabilities>& probs) {
  const std::size_t n = probs.size();
  if (n < 3) fail("pca_rows", "decision-space PCA needs at least 3 rows");

  std::array<double, 4> mean{};
  for (const auto& row : probs)
    for (int c = 0; c < 4; ++c) mean[c] += row.p[c];
  for (int c = 0; c < 4; ++c) mean[c] /= static_cast<double>(n);

  std::array<std::array<double, 4>, 4> cov{};
  for (const auto& row : probs) {
    std::array<double, 4> d;
    for (int c = 0; c < 4; ++c) d[c] = row.p[c] - mean[c];
    for (int a = 0; a < 4; ++a)
      for (int b = a; b < 4; ++b) cov[a][b] += d[a] * d[b];
  }
  for (int a = 0; a < 4; ++a)
    for (int b = a; b < 4; ++b) {
      cov[a][b] /= static_cast<double>(n - 1);
      cov[b][a] = cov[a][b];
    }
  const double total = cov[0][0] + cov[1][1] + cov[2][2] + cov[3][3];
  if (total < 1e-24)
    fail("zero_variance", "zero variance: all probability rows are (numerically) identical");

  std::array<std::array<double, 4>, 4> work = cov, vecs{};
  std::array<double, 4> evals{};
  detail::jacobi4(work, evals, vecs);

  // order eigenpairs by descending eigenvalue, stable on ties
  std::array<int, 4> idx = {0, 1, 2, 3};
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return evals[a] > evals[b]; });

  DecisionSpaceCoords out;
  for (int comp = 0; comp < 2; ++comp) {
    std::array<double, 4> axis;
    for (int k = 0; k < 4; ++k) axis[k] = vecs[k][idx[comp]];
    // sign convention: the largest-magnitude loading is positive
    int big = 0;
    for (int k = 1; k < 4; ++k)
      if (std::abs(axis[k]) > std::abs(axis[big])) big = k;
    if (axis[big] < 0.0)
      for (double& x : axis) x = -x;
    out.axes[comp] = axis;
    const double ev = std::max(evals[idx[comp]], 0.0);
    out.explained[comp] = std::min(ev / total, 1.0);
  }

  out.coords.resize(n);
  for (std::size_t r = 0; r < n; ++r) {
    for (int comp = 0; comp < 2; ++comp) {
      double dot = 0.0;
      for (int c = 0; c < 4; ++c) dot += (probs[r].p[c] - mean[c]) * out.axes[comp][c];
      out.coords[r][comp] = dot;
    }
  }
  return out;
}

}  // namespace fproxkit
