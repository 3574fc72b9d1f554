#pragma once

// Core domain types: the fixed 11-nutrient panel (grams per 100 g) and the
// product record that every pipeline stage consumes.

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fproxkit/error.hpp"

namespace fproxkit {

enum class Nutrient : int {
  protein = 0,
  fat,
  carbohydrate,
  sugars,
  fiber,
  calcium,
  iron,
  sodium,
  cholesterol,
  saturated_fat,
  trans_fat,
};

inline constexpr int kNutrientCount = 11;

inline constexpr std::array<Nutrient, kNutrientCount> kAllNutrients = {
    Nutrient::protein,     Nutrient::fat,  Nutrient::carbohydrate, Nutrient::sugars,
    Nutrient::fiber,       Nutrient::calcium, Nutrient::iron,       Nutrient::sodium,
    Nutrient::cholesterol, Nutrient::saturated_fat, Nutrient::trans_fat,
};

// Snake-case keys used in configs, stats and reports.
inline constexpr std::array<const char*, kNutrientCount> kNutrientKeys = {
    "protein", "fat",  "carbohydrate", "sugars",      "fiber",         "calcium",
    "iron",    "sodium", "cholesterol", "saturated_fat", "trans_fat",
};

// Canonical CSV column names.
inline constexpr std::array<const char*, kNutrientCount> kNutrientColumns = {
    "protein_g", "fat_g",  "carbohydrate_g", "sugars_g",        "fiber_g",     "calcium_g",
    "iron_g",    "sodium_g", "cholesterol_g", "saturated_fat_g", "trans_fat_g",
};

// Human wording used by the sentence builder.
inline constexpr std::array<const char*, kNutrientCount> kNutrientSentenceNames = {
    "protein", "fat",  "carbohydrates", "sugars",      "fiber",         "calcium",
    "iron",    "sodium", "cholesterol", "saturated fat", "trans fat",
};

enum class ProductKind : int { food = 0, beverage = 1, fats_oils_nuts = 2 };

inline const char* kind_name(ProductKind k) {
  switch (k) {
    case ProductKind::food: return "food";
    case ProductKind::beverage: return "beverage";
    case ProductKind::fats_oils_nuts: return "fats_oils_nuts";
  }
  return "food";
}

inline std::optional<ProductKind> parse_kind(std::string_view s) {
  if (s == "food") return ProductKind::food;
  if (s == "beverage" || s == "drink") return ProductKind::beverage;
  if (s == "fats_oils_nuts") return ProductKind::fats_oils_nuts;
  return std::nullopt;
}

struct NutrientPanel {
  std::array<std::optional<double>, kNutrientCount> values{};

  std::optional<double>& operator[](Nutrient n) { return values[static_cast<int>(n)]; }
  const std::optional<double>& operator[](Nutrient n) const { return values[static_cast<int>(n)]; }

  bool complete() const {
    for (const auto& v : values)
      if (!v) return false;
    return true;
  }

  bool operator==(const NutrientPanel&) const = default;
};

struct ProductRecord {
  std::string id;
  std::string name;
  std::string ingredients_text;
  std::optional<int> nova;  // 1..4 when known
  ProductKind kind = ProductKind::food;
  std::string category;  // empty when unknown
  NutrientPanel panel;

  // Extra inputs used by the deterministic scorers.
  std::optional<double> energy_kj;           // per 100 g
  std::optional<double> fruit_veg_fraction;  // 0..1
  bool is_water = false;
  bool is_raw = false;
  bool has_mup = false;       // contains at least one marker of ultra-processing
  bool has_risk_mup = false;  // contains at least one risk-bearing marker

  bool operator==(const ProductRecord&) const = default;
};

using ProductTable = std::vector<ProductRecord>;

// Which fields a record must carry to count as complete.
struct FieldSet {
  bool name = false;
  bool ingredients = false;
  bool nova = false;
  std::array<bool, kNutrientCount> nutrients{};

  static FieldSet none() { return {}; }

  static FieldSet full_panel() {
    FieldSet f;
    f.nutrients.fill(true);
    return f;
  }

  static FieldSet labeled_panel() {
    FieldSet f = full_panel();
    f.nova = true;
    return f;
  }

  static FieldSet all() {
    FieldSet f = labeled_panel();
    f.name = true;
    f.ingredients = true;
    return f;
  }
};

inline bool has_fields(const ProductRecord& r, const FieldSet& req) {
  if (req.name && r.name.empty()) return false;
  if (req.ingredients && r.ingredients_text.empty()) return false;
  if (req.nova && !r.nova) return false;
  for (int i = 0; i < kNutrientCount; ++i)
    if (req.nutrients[i] && !r.panel.values[i]) return false;
  return true;
}

// Keeps exactly the rows satisfying `req`, preserving order.
inline ProductTable filter_complete(const ProductTable& table, const FieldSet& req) {
  ProductTable out;
  out.reserve(table.size());
  for (const auto& r : table)
    if (has_fields(r, req)) out.push_back(r);
  return out;
}

}  // namespace fproxkit
