#pragma once

// Rendered comparison artifacts: per-category score distribution summaries
// (five-number box data, categories ranked by median) and the wide model x
// class x metric comparison table.

#include <algorithm>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"
#include "fproxkit/eval.hpp"

namespace fproxkit {

struct ScoredCategory {
  std::string category;
  double score = 0.0;
};

struct CategorySummary {
  std::string category;
  std::size_t n = 0;
  double min = 0.0;
  double q1 = 0.0;      // lower quartile
  double median = 0.0;
  double q3 = 0.0;      // upper quartile
  double max = 0.0;
};

struct CategorySummaryResult {
  std::vector<CategorySummary> categories;  // ascending median, then name
  std::vector<std::string> warnings;
};

namespace detail {

// Order statistic at fraction p via linear interpolation, h = p * (n - 1).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(h);
  if (lo + 1 >= sorted.size()) return sorted.back();
  const double frac = h - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace detail

// Five-number summaries for every category with at least min_n scored rows,
// sorted by ascending median (ties by category name). Rows with an empty
// category string are ignored.
inline CategorySummaryResult category_fpro_summary(const std::vector<ScoredCategory>& rows,
                                                   std::size_t min_n = 20) {
  if (min_n < 1) fail("summary_min_n", "min_n must be at least 1");
  std::map<std::string, std::vector<double>> groups;
  for (const auto& row : rows)
    if (!row.category.empty()) groups[row.category].push_back(row.score);

  CategorySummaryResult out;
  for (auto& [category, scores] : groups) {
    if (scores.size() < min_n) continue;
    std::sort(scores.begin(), scores.end());
    CategorySummary s;
    s.category = category;
    s.n = scores.size();
    s.min = scores.front();
    s.q1 = detail::quantile_sorted(scores, 0.25);
    s.median = detail::quantile_sorted(scores, 0.5);
    s.q3 = detail::quantile_sorted(scores, 0.75);
    s.max = scores.back();
    out.categories.push_back(std::move(s));
  }
  std::sort(out.categories.begin(), out.categories.end(),
            [](const CategorySummary& a, const CategorySummary& b) {
              if (a.median != b.median) return a.median < b.median;
              return a.category < b.category;
            });
  if (out.categories.empty())
    out.warnings.push_back("no category has at least " + std::to_string(min_n) + " scored rows");
  return out;
}

inline std::string category_summary_csv(const CategorySummaryResult& result) {
  std::string out;
  csv::write_row(out, {"category", "n", "min", "q1", "median", "q3", "max"});
  for (const auto& s : result.categories)
    csv::write_row(out, {s.category, csv::format_int(static_cast<long long>(s.n)),
                         csv::format_double(s.min), csv::format_double(s.q1),
                         csv::format_double(s.median), csv::format_double(s.q3),
                         csv::format_double(s.max)});
  return out;
}

inline nlohmann::json category_summary_json(const CategorySummaryResult& result) {
  nlohmann::json j;
  auto arr = nlohmann::json::array();
  for (const auto& s : result.categories)
    arr.push_back({{"category", s.category},
                   {"n", s.n},
                   {"min", s.min},
                   {"q1", s.q1},
                   {"median", s.median},
                   {"q3", s.q3},
                   {"max", s.max}});
  j["categories"] = std::move(arr);
  j["warnings"] = result.warnings;
  return j;
}

// Wide comparison table: one row per report, one "mean +/- std" cell per
// (class, metric), 4-decimal precision. All reports must cover the same
// class set.
inline std::string metrics_table(const std::vector<EvalReport>& reports) {
  if (reports.empty()) fail("report_empty", "no evaluation reports to tabulate");
  auto class_set = [](const EvalReport& r) {
    std::vector<int> classes;
    for (int c = 0; c < kClassCount; ++c)
      if (r.auc[c] && r.aup[c]) classes.push_back(c + 1);
    return classes;
  };
  const auto classes = class_set(reports.front());
  if (classes.empty()) fail("report_classes", "first report has no evaluable class");
  for (const auto& r : reports)
    if (class_set(r) != classes)
      fail("report_classes", "reports do not share the same class set");

  auto cell = [](const ClassMetric& m) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f ± %.4f", m.mean, m.stdev);
    return std::string(buf);
  };
  std::string out;
  std::vector<std::string> row = {"model"};
  for (const int c : classes) {
    row.push_back("auc_class" + std::to_string(c));
    row.push_back("aup_class" + std::to_string(c));
  }
  csv::write_row(out, row);
  for (const auto& r : reports) {
    row.clear();
    row.push_back(r.model_name);
    for (const int c : classes) {
      row.push_back(cell(*r.auc[c - 1]));
      row.push_back(cell(*r.aup[c - 1]));
    }
    csv::write_row(out, row);
  }
  return out;
}

}  // namespace fproxkit
