#pragma once

// Corpus-level nutrient distributions in log10 space: location/scale fitting,
// z-score profiles, pairwise panel comparison, and log-binned histograms.
// Zero and missing concentrations are excluded from log-space statistics (a
// missing value is treated as "not positive", never imputed here).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fproxkit/error.hpp"
#include "fproxkit/nutrients.hpp"

namespace fproxkit {

struct NutrientStatEntry {
  double mu = 0.0;     // mean of log10 concentration
  double sigma = 0.0;  // sample (n-1) std of log10 concentration
  std::size_t n_samples = 0;

  bool operator==(const NutrientStatEntry&) const = default;
};

struct NutrientStats {
  // Entry present only for nutrients with >= 2 positive samples.
  std::array<std::optional<NutrientStatEntry>, kNutrientCount> entries;

  const std::optional<NutrientStatEntry>& operator[](Nutrient n) const {
    return entries[static_cast<std::size_t>(n)];
  }

  bool operator==(const NutrientStats&) const = default;

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    for (int n = 0; n < kNutrientCount; ++n) {
      if (!entries[n]) continue;
      j[kNutrientKeys[n]] = {{"mu", entries[n]->mu},
                             {"sigma", entries[n]->sigma},
                             {"n_samples", entries[n]->n_samples}};
    }
    return j;
  }

  static NutrientStats from_json(const nlohmann::json& j) {
    if (!j.is_object()) fail("stats_json", "nutrient stats must be a JSON object");
    NutrientStats s;
    for (const auto& [key, val] : j.items()) {
      int idx = -1;
      for (int n = 0; n < kNutrientCount; ++n)
        if (key == kNutrientKeys[n]) idx = n;
      if (idx < 0) fail("stats_json", "unknown nutrient in stats: " + key);
      if (!val.is_object() || !val.contains("mu") || !val.contains("sigma") ||
          !val.contains("n_samples"))
        fail("stats_json", "stats for '" + key + "' need mu, sigma, n_samples");
      NutrientStatEntry e;
      e.mu = val["mu"].get<double>();
      e.sigma = val["sigma"].get<double>();
      e.n_samples = val["n_samples"].get<std::size_t>();
      if (e.sigma < 0.0) fail("stats_json", "sigma for '" + key + "' must be >= 0");
      if (e.n_samples < 2) fail("stats_json", "n_samples for '" + key + "' must be >= 2");
      s.entries[idx] = e;
    }
    return s;
  }
};

struct FitResult {
  NutrientStats stats;
  std::vector<std::string> warnings;  // nutrients skipped for lack of positive support
};

// Per nutrient: mean and sample std of log10 over strictly positive
// concentrations. Values are sorted before accumulation so the result is
// bit-identical under any row reordering of the table.
inline FitResult fit_stats(const ProductTable& table) {
  if (table.empty()) fail("profile_empty", "cannot fit nutrient stats on an empty table");
  FitResult out;
  std::vector<double> logs;
  for (int n = 0; n < kNutrientCount; ++n) {
    logs.clear();
    for (const auto& rec : table) {
      const auto& v = rec.panel.values[n];
      if (v && *v > 0.0) logs.push_back(std::log10(*v));
    }
    if (logs.size() < 2) {
      out.warnings.push_back(std::string(kNutrientKeys[n]) + ": " +
                             std::to_string(logs.size()) +
                             " positive value(s); need at least 2, stat omitted");
      continue;
    }
    std::sort(logs.begin(), logs.end());
    double sum = 0.0;
    for (const double x : logs) sum += x;
    const double mu = sum / static_cast<double>(logs.size());
    double ss = 0.0;
    for (const double x : logs) ss += (x - mu) * (x - mu);
    NutrientStatEntry e;
    e.mu = mu;
    e.sigma = std::sqrt(ss / static_cast<double>(logs.size() - 1));
    e.n_samples = logs.size();
    out.stats.entries[n] = e;
  }
  return out;
}

struct ZProfile {
  // z = (log10 c - mu) / sigma; absent where c is zero/missing, the stat is
  // missing, or sigma is zero.
  std::array<std::optional<double>, kNutrientCount> z;

  const std::optional<double>& operator[](Nutrient n) const {
    return z[static_cast<std::size_t>(n)];
  }

  bool operator==(const ZProfile&) const = default;
};

inline ZProfile zscore(const NutrientPanel& panel, const NutrientStats& stats) {
  ZProfile out;
  for (int n = 0; n < kNutrientCount; ++n) {
    const auto& c = panel.values[n];
    const auto& e = stats.entries[n];
    if (c && *c > 0.0 && e && e->sigma > 0.0)
      out.z[n] = (std::log10(*c) - e->mu) / e->sigma;
  }
  return out;
}

struct ProfileComparison {
  // Denominator: nutrients positive in at least one panel (missing = 0).
  double frac_changed_10pct = 0.0;  // |b/a - 1| > 0.10; one-sided zero counts
  double frac_changed_10x = 0.0;    // max(b/a, a/b) > 10; one-sided zero counts
  std::array<std::optional<double>, kNutrientCount> ratios;  // b/a where a > 0
};

inline ProfileComparison compare_profiles(const NutrientPanel& a, const NutrientPanel& b) {
  ProfileComparison out;
  std::size_t denom = 0, changed_pct = 0, changed_fold = 0;
  for (int n = 0; n < kNutrientCount; ++n) {
    const double va = a.values[n].value_or(0.0);
    const double vb = b.values[n].value_or(0.0);
    if (va <= 0.0 && vb <= 0.0) continue;
    ++denom;
    if (va > 0.0 && vb > 0.0) {
      const double r = vb / va;
      out.ratios[n] = r;
      if (std::abs(r - 1.0) > 0.10) ++changed_pct;
      if (std::max(r, 1.0 / r) > 10.0) ++changed_fold;
    } else {
      // exactly one side positive: appeared or vanished
      if (va > 0.0) out.ratios[n] = 0.0;
      ++changed_pct;
      ++changed_fold;
    }
  }
  if (denom == 0)
    fail("profile_empty", "both panels have no positive nutrient; comparison undefined");
  out.frac_changed_10pct = static_cast<double>(changed_pct) / static_cast<double>(denom);
  out.frac_changed_10x = static_cast<double>(changed_fold) / static_cast<double>(denom);
  return out;
}

struct HistogramBin {
  double lo_log10 = 0.0;  // inclusive edge, in log10 units
  double hi_log10 = 0.0;  // exclusive edge
  std::size_t count = 0;

  bool operator==(const HistogramBin&) const = default;
};

// Counts of positive values in fixed-width log10 bins; non-positive values
// are ignored; only occupied bins are returned, ascending.
inline std::vector<HistogramBin> log_histogram(const std::vector<double>& values,
                                               double bin_width = 0.25) {
  if (!(bin_width > 0.0)) fail("histogram_width", "bin width must be positive");
  std::map<long long, std::size_t> bins;
  for (const double v : values) {
    if (!(v > 0.0)) continue;
    const long long idx = static_cast<long long>(std::floor(std::log10(v) / bin_width));
    ++bins[idx];
  }
  std::vector<HistogramBin> out;
  out.reserve(bins.size());
  for (const auto& [idx, count] : bins)
    out.push_back({static_cast<double>(idx) * bin_width,
                   static_cast<double>(idx + 1) * bin_width, count});
  return out;
}

// Histogram over one nutrient column of a table.
inline std::vector<HistogramBin> log_histogram(const ProductTable& table, Nutrient nutrient,
                                               double bin_width = 0.25) {
  std::vector<double> values;
  for (const auto& rec : table)
    if (const auto& v = rec.panel[nutrient]) values.push_back(*v);
  return log_histogram(values, bin_width);
}

}  // namespace fproxkit
