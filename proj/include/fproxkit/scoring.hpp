#pragma once

// Deterministic label scorers.
//
// Nutri-Score: four penalised components (energy, sugars, saturated fat,
// sodium; 0-10 points each) minus three credited components (fiber, protein,
// fruit/vegetable fraction; 0-5 points each), banded into letters A-E with
// separate bands per scale (food / fats-oils-nuts / drink). Component point
// ladders are external, versioned JSON config — they are regulation text, not
// code.
//
// SIGA: a seven-class rule engine over (nova group, raw flag, nutritional
// balance, marker-of-ultraprocessing flags). Balance thresholds compare salt
// (sodium x 2.5), sugars and fat against per-kind cutoffs with strict "<";
// equality counts as imbalanced.

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "fproxkit/error.hpp"
#include "fproxkit/nutrients.hpp"

namespace fproxkit {

// ---------------------------------------------------------------------------
// Nutri-Score

enum class NutriScale { food = 0, fats_oils_nuts = 1, drink = 2 };
inline constexpr std::array<NutriScale, 3> kAllScales = {NutriScale::food,
                                                         NutriScale::fats_oils_nuts,
                                                         NutriScale::drink};
inline constexpr const char* kScaleNames[3] = {"food", "fats_oils_nuts", "drink"};

inline const char* scale_name(NutriScale s) { return kScaleNames[static_cast<int>(s)]; }

inline NutriScale scale_for_kind(ProductKind kind) {
  switch (kind) {
    case ProductKind::beverage: return NutriScale::drink;
    case ProductKind::fats_oils_nuts: return NutriScale::fats_oils_nuts;
    default: return NutriScale::food;
  }
}

// Component order doubles as the missing-value report order.
enum class NutriComponent {
  energy = 0,
  sugars = 1,
  saturated_fat = 2,
  sodium = 3,
  fiber = 4,
  protein = 5,
  fruit_veg = 6,
};
inline constexpr int kNutriComponentCount = 7;
inline constexpr const char* kNutriComponentNames[kNutriComponentCount] = {
    "energy", "sugars", "saturated_fat", "sodium", "fiber", "protein", "fruit_veg"};
inline constexpr bool kNutriComponentNegative[kNutriComponentCount] = {true,  true,  true, true,
                                                                       false, false, false};

enum class NutriLabel { A = 0, B = 1, C = 2, D = 3, E = 4 };
inline constexpr const char* kNutriLabelNames[5] = {"A", "B", "C", "D", "E"};
inline const char* label_name(NutriLabel l) { return kNutriLabelNames[static_cast<int>(l)]; }

// One component's threshold ladder: rungs (threshold, points) with strictly
// increasing thresholds. A value earns the points of the highest rung whose
// threshold it strictly exceeds; at or below the first rung earns 0.
struct PointsLadder {
  std::vector<std::pair<double, int>> rungs;

  int points_for(double value) const {
    int pts = 0;
    for (const auto& [threshold, p] : rungs) {
      if (value > threshold)
        pts = p;
      else
        break;
    }
    return pts;
  }
};

struct PointTables {
  // [scale][component]
  std::array<std::array<PointsLadder, kNutriComponentCount>, 3> ladders;

  const PointsLadder& ladder(NutriScale scale, NutriComponent component) const {
    return ladders[static_cast<int>(scale)][static_cast<int>(component)];
  }

  // JSON layout: {scale: {component: [[threshold, points], ...]}}. All three
  // scales and all seven components are required; keys starting with '$'
  // (e.g. "$version") are ignored. Penalised components cap at 10 points,
  // credited ones at 5.
  static PointTables from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail("points_json", std::string("point tables are not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("points_json", "point tables must be a JSON object");

    PointTables t;
    std::array<std::array<bool, kNutriComponentCount>, 3> seen{};
    for (const auto& [scale_key, components] : j.items()) {
      if (!scale_key.empty() && scale_key[0] == '$') continue;
      int si = -1;
      for (int s = 0; s < 3; ++s)
        if (scale_key == kScaleNames[s]) si = s;
      if (si < 0) fail("points_scale", "unknown scale in point tables: " + scale_key);
      if (!components.is_object())
        fail("points_scale", "scale '" + scale_key + "' must map components to ladders");

      for (const auto& [comp_key, rungs] : components.items()) {
        int ci = -1;
        for (int c = 0; c < kNutriComponentCount; ++c)
          if (comp_key == kNutriComponentNames[c]) ci = c;
        if (ci < 0)
          fail("points_component", "unknown component in scale '" + scale_key + "': " + comp_key);
        const int cap = kNutriComponentNegative[ci] ? 10 : 5;

        if (!rungs.is_array())
          fail("points_ladder", scale_key + "." + comp_key + ": ladder must be an array");
        PointsLadder ladder;
        double prev = 0.0;
        bool first = true;
        for (const auto& rung : rungs) {
          if (!rung.is_array() || rung.size() != 2 || !rung[0].is_number() ||
              !rung[1].is_number_integer())
            fail("points_ladder",
                 scale_key + "." + comp_key + ": each rung must be [threshold, points]");
          const double threshold = rung[0].get<double>();
          const int points = rung[1].get<int>();
          if (!first && !(threshold > prev))
            fail("points_ladder",
                 scale_key + "." + comp_key + ": thresholds must be strictly increasing");
          if (points < 0 || points > cap)
            fail("points_ladder", scale_key + "." + comp_key + ": points " +
                                      std::to_string(points) + " outside [0, " +
                                      std::to_string(cap) + "]");
          ladder.rungs.emplace_back(threshold, points);
          prev = threshold;
          first = false;
        }
        t.ladders[si][ci] = std::move(ladder);
        seen[si][ci] = true;
      }
    }
    for (int s = 0; s < 3; ++s)
      for (int c = 0; c < kNutriComponentCount; ++c)
        if (!seen[s][c])
          fail("points_missing", std::string("point tables missing ") + kScaleNames[s] + "." +
                                     kNutriComponentNames[c]);
    return t;
  }
};

struct NutriPoints {
  bool scorable = false;
  std::string missing_component;  // first absent component when not scorable
  int n_points = 0;               // penalised sum
  int p_points = 0;               // credited sum
};

inline NutriPoints nutriscore_points(const NutrientPanel& panel, std::optional<double> energy_kj,
                                     std::optional<double> fruit_veg_fraction,
                                     const PointTables& tables, NutriScale scale) {
  const std::optional<double> values[kNutriComponentCount] = {
      energy_kj,
      panel[Nutrient::sugars],
      panel[Nutrient::saturated_fat],
      panel[Nutrient::sodium],
      panel[Nutrient::fiber],
      panel[Nutrient::protein],
      fruit_veg_fraction,
  };
  NutriPoints out;
  for (int c = 0; c < kNutriComponentCount; ++c) {
    if (!values[c]) {
      out.missing_component = kNutriComponentNames[c];
      return out;
    }
  }
  out.scorable = true;
  for (int c = 0; c < kNutriComponentCount; ++c) {
    const int pts =
        tables.ladder(scale, static_cast<NutriComponent>(c)).points_for(*values[c]);
    (kNutriComponentNegative[c] ? out.n_points : out.p_points) += pts;
  }
  return out;
}

// Band edges per scale; component caps bound scores to [-15, 40].
inline NutriLabel nutriscore_label(int score, NutriScale scale, bool is_water = false) {
  if (score < -15 || score > 40)
    fail("score_band",
         "score " + std::to_string(score) + " outside the representable band [-15, 40]");
  switch (scale) {
    case NutriScale::food:
      if (score <= 0) return NutriLabel::A;
      if (score <= 2) return NutriLabel::B;
      if (score <= 10) return NutriLabel::C;
      if (score <= 18) return NutriLabel::D;
      return NutriLabel::E;
    case NutriScale::fats_oils_nuts:
      if (score <= -6) return NutriLabel::A;
      if (score <= 2) return NutriLabel::B;
      if (score <= 10) return NutriLabel::C;
      if (score <= 18) return NutriLabel::D;
      return NutriLabel::E;
    case NutriScale::drink:
      if (is_water) return NutriLabel::A;
      if (score <= 2) return NutriLabel::B;
      if (score <= 6) return NutriLabel::C;
      if (score <= 9) return NutriLabel::D;
      return NutriLabel::E;
  }
  fail("score_band", "unreachable scale");
}

struct NutriScoreResult {
  bool scorable = false;
  std::string missing_component;
  int n_points = 0;
  int p_points = 0;
  int score = 0;  // n_points - p_points
  NutriLabel label = NutriLabel::A;
  NutriScale scale = NutriScale::food;
};

inline NutriScoreResult nutriscore(const ProductRecord& rec, const PointTables& tables) {
  NutriScoreResult out;
  out.scale = scale_for_kind(rec.kind);
  const auto pts =
      nutriscore_points(rec.panel, rec.energy_kj, rec.fruit_veg_fraction, tables, out.scale);
  if (!pts.scorable) {
    out.missing_component = pts.missing_component;
    return out;
  }
  out.scorable = true;
  out.n_points = pts.n_points;
  out.p_points = pts.p_points;
  out.score = pts.n_points - pts.p_points;
  out.label = nutriscore_label(out.score, out.scale, rec.is_water);
  return out;
}

// ---------------------------------------------------------------------------
// SIGA

struct SigaInput {
  int nova = 0;
  bool is_raw = false;
  bool balanced = false;
  bool has_mup = false;       // any marker of ultra-processing present
  bool has_risk_mup = false;  // a risk-flagged marker present (implies has_mup)
};

struct SigaBalance {
  bool scorable = false;
  std::string missing_component;  // sodium | sugars | fat
  bool balanced = false;
};

// Salt is derived as sodium x 2.5. Food and fats/oils/nuts use the food
// cutoffs (1.5 salt / 12.5 sugars / 17.5 fat); beverages use half of each.
// A value equal to its cutoff counts as imbalanced.
inline SigaBalance siga_balance(const NutrientPanel& panel, ProductKind kind) {
  SigaBalance out;
  const auto sodium = panel[Nutrient::sodium];
  const auto sugars = panel[Nutrient::sugars];
  const auto fat = panel[Nutrient::fat];
  if (!sodium) {
    out.missing_component = "sodium";
    return out;
  }
  if (!sugars) {
    out.missing_component = "sugars";
    return out;
  }
  if (!fat) {
    out.missing_component = "fat";
    return out;
  }
  const bool beverage = kind == ProductKind::beverage;
  const double salt_cut = beverage ? 0.75 : 1.5;
  const double sugar_cut = beverage ? 6.25 : 12.5;
  const double fat_cut = beverage ? 8.75 : 17.5;
  out.scorable = true;
  out.balanced = *sodium * 2.5 < salt_cut && *sugars < sugar_cut && *fat < fat_cut;
  return out;
}

// Classes: 1 unprocessed, 2 minimally processed, 3 balanced processed,
// 4 imbalanced processed, 5 balanced ultra-processed, 6 imbalanced
// ultra-processed, 7 ultra-processed with a risk-flagged marker. One marker
// of ultra-processing is enough to treat the product as ultra-processed.
inline int siga_classify(SigaInput input) {
  if (input.nova < 1 || input.nova > 4)
    fail("siga_domain", "nova group " + std::to_string(input.nova) + " outside 1..4");
  if (input.has_risk_mup && !input.has_mup)
    fail("siga_invariant", "has_risk_mup set without has_mup");
  if (input.has_mup && input.nova < 4) input.nova = 4;

  switch (input.nova) {
    case 1: return input.is_raw ? 1 : 2;
    case 2: return 2;
    case 3: return input.balanced ? 3 : 4;
    default:
      if (input.has_risk_mup) return 7;
      return input.balanced ? 5 : 6;
  }
}

struct SigaResult {
  bool scorable = false;
  std::string missing_component;  // nova | sodium | sugars | fat
  int siga_class = 0;
  bool balanced = false;
};

inline SigaResult siga_record(const ProductRecord& rec) {
  SigaResult out;
  if (!rec.nova) {
    out.missing_component = "nova";
    return out;
  }
  const auto balance = siga_balance(rec.panel, rec.kind);
  if (!balance.scorable) {
    out.missing_component = balance.missing_component;
    return out;
  }
  out.scorable = true;
  out.balanced = balance.balanced;
  out.siga_class = siga_classify(
      {*rec.nova, rec.is_raw, balance.balanced, rec.has_mup, rec.has_risk_mup});
  return out;
}

}  // namespace fproxkit
