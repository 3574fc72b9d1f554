#pragma once

// Loading, cleaning and validating tabular product dumps into ProductRecords.
// Source files are CSV/TSV with a header row; a mapping config binds each
// canonical field to a source column (with an optional multiplicative scale
// for unit conversion, e.g. mg -> g). Serialization to the canonical column
// layout round-trips exactly.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"
#include "fproxkit/nutrients.hpp"

namespace fproxkit {

// ---------------------------------------------------------------------------
// cell cleaning

struct CellParse {
  std::optional<double> value;  // set when the cell held a usable number
  bool repaired = false;        // decimal comma rewritten as a point
  bool malformed = false;       // non-empty text that is not a non-negative number
};

// Parses one numeric cell. Empty/whitespace is missing. A cell matching the
// full pattern digits ',' digits (no dot anywhere) is repaired by treating the
// comma as a decimal point; thousands separators are never guessed. Negative
// or non-finite values are malformed (panels hold non-negative quantities).
inline CellParse clean_numeric(std::string_view raw) {
  CellParse out;
  std::string_view s = csv::trim(raw);
  if (s.empty()) return out;

  std::string buf;
  const auto comma = s.find(',');
  if (comma != std::string_view::npos && comma > 0 && comma + 1 < s.size() &&
      s.find(',', comma + 1) == std::string_view::npos &&
      s.find('.') == std::string_view::npos) {
    bool digits = true;
    for (std::size_t i = 0; i < s.size() && digits; ++i)
      if (i != comma && !std::isdigit(static_cast<unsigned char>(s[i]))) digits = false;
    if (digits) {
      buf.assign(s);
      buf[comma] = '.';
      s = buf;
      out.repaired = true;
    }
  }
  if (!s.empty() && s[0] == '+') s.remove_prefix(1);

  const auto v = csv::parse_double(s);
  if (!v || !std::isfinite(*v) || *v < 0.0) {
    out.repaired = false;
    out.malformed = true;
    return out;
  }
  out.value = *v;
  return out;
}

// ---------------------------------------------------------------------------
// column mapping

struct ColumnBinding {
  std::string column;  // source header name
  double scale = 1.0;  // multiplicative unit conversion, applied to numeric fields

  bool operator==(const ColumnBinding&) const = default;
};

struct ColumnMapping {
  char delimiter = ',';
  std::map<std::string, ColumnBinding> bindings;  // canonical field -> source

  // Canonical field names in canonical column order. The first 15 are the
  // core schema; the rest are optional scorer inputs.
  static const std::vector<std::string>& canonical_fields() {
    static const std::vector<std::string> fields = [] {
      std::vector<std::string> f = {"id", "product_name", "ingredients_text", "nova_group"};
      for (const char* c : kNutrientColumns) f.push_back(c);
      for (const char* c : {"kind", "category", "energy_kj", "fruit_veg_fraction", "is_water",
                            "is_raw", "has_mup", "has_risk_mup"})
        f.push_back(c);
      return f;
    }();
    return fields;
  }

  // Binds every canonical field to a same-named source column.
  static ColumnMapping identity() {
    ColumnMapping m;
    for (const auto& f : canonical_fields()) m.bindings[f] = ColumnBinding{f, 1.0};
    return m;
  }

  // JSON object {canonical_field: "source_column"} or
  // {canonical_field: {"column": ..., "scale": ...}}. Keys starting with '$'
  // are reserved; "$delimiter" accepts "comma", "tab", "," or "\t".
  static ColumnMapping from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      fail("mapping_json", std::string("mapping config is not valid JSON: ") + e.what());
    }
    if (!j.is_object()) fail("mapping_json", "mapping config must be a JSON object");

    ColumnMapping m;
    const auto& known = canonical_fields();
    for (const auto& [key, val] : j.items()) {
      if (!key.empty() && key[0] == '$') {
        if (key == "$delimiter") {
          const std::string d = val.get<std::string>();
          if (d == "comma" || d == ",") m.delimiter = ',';
          else if (d == "tab" || d == "\t") m.delimiter = '\t';
          else fail("mapping_delimiter", "unsupported $delimiter value: " + d);
        }
        continue;  // other reserved keys ignored
      }
      if (std::find(known.begin(), known.end(), key) == known.end())
        fail("mapping_field", "unknown canonical field in mapping: " + key);
      ColumnBinding b;
      if (val.is_string()) {
        b.column = val.get<std::string>();
      } else if (val.is_object()) {
        if (!val.contains("column") || !val["column"].is_string())
          fail("mapping_field", "binding for '" + key + "' needs a \"column\" string");
        b.column = val["column"].get<std::string>();
        if (val.contains("scale")) b.scale = val["scale"].get<double>();
      } else {
        fail("mapping_field", "binding for '" + key + "' must be a string or object");
      }
      if (b.column.empty()) fail("mapping_field", "empty source column for '" + key + "'");
      if (!(b.scale > 0.0) || !std::isfinite(b.scale))
        fail("mapping_scale", "scale for '" + key + "' must be a positive finite number");
      m.bindings[key] = b;
    }
    if (!m.bindings.count("id")) fail("mapping_id", "mapping must bind the 'id' field");
    return m;
  }
};

// Optional category -> kind table ({"beverages": "beverage", ...}); applied
// when a row has no usable kind cell. Categories not listed default to food.
inline std::map<std::string, ProductKind> load_category_kinds(const std::string& json_text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail("category_kind", std::string("category-kind config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail("category_kind", "category-kind config must be a JSON object");
  std::map<std::string, ProductKind> out;
  for (const auto& [cat, val] : j.items()) {
    const auto k = parse_kind(val.get<std::string>());
    if (!k) fail("category_kind", "unknown kind for category '" + cat + "'");
    out[cat] = *k;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ingest report

struct RowIssue {
  std::size_t row = 0;  // 1-based data row number (header excluded)
  std::string id;       // as read, possibly empty
  std::string code;
  std::string detail;
};

struct IngestReport {
  std::size_t rows_read = 0;
  std::size_t rows_kept = 0;
  std::map<std::string, std::size_t> rejections;  // reason -> count (one per rejected row)
  std::map<std::string, std::size_t> repairs;     // repair code -> cell count (kept rows)
  std::map<std::string, std::size_t> warnings;    // soft-rule code -> count
  std::vector<RowIssue> rejected_rows;
  std::vector<RowIssue> warned_rows;

  std::size_t rejected_total() const {
    std::size_t s = 0;
    for (const auto& [_, c] : rejections) s += c;
    return s;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["rows_read"] = rows_read;
    j["rows_kept"] = rows_kept;
    j["rejections"] = rejections;
    j["repairs"] = repairs;
    j["warnings"] = warnings;
    auto issues = [](const std::vector<RowIssue>& v) {
      nlohmann::json a = nlohmann::json::array();
      for (const auto& i : v)
        a.push_back({{"row", i.row}, {"id", i.id}, {"code", i.code}, {"detail", i.detail}});
      return a;
    };
    j["rejected_rows"] = issues(rejected_rows);
    j["warned_rows"] = issues(warned_rows);
    return j;
  }
};

struct IngestOptions {
  bool strict_consistency = false;  // soft panel warnings become rejections
  std::map<std::string, ProductKind> category_kinds;
};

struct IngestResult {
  ProductTable products;
  IngestReport report;
};

// ---------------------------------------------------------------------------
// loading

namespace detail {

inline std::optional<bool> parse_bool_cell(std::string_view raw) {
  std::string s(csv::trim(raw));
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (s.empty() || s == "0" || s == "false" || s == "no") return false;
  if (s == "1" || s == "true" || s == "yes") return true;
  return std::nullopt;
}

}  // namespace detail

inline IngestResult load_products(const std::string& text, const ColumnMapping& mapping,
                                  const IngestOptions& options = {}) {
  const bool identity_like = [&] {
    // Identity mappings tolerate absent optional columns; explicit mappings
    // must resolve every binding.
    const auto id = ColumnMapping::identity();
    return mapping.bindings == id.bindings && mapping.delimiter == ',';
  }();

  const auto records = csv::parse(text, mapping.delimiter);
  IngestResult out;
  if (records.empty()) fail("ingest_empty", "input has no header row");

  const auto& header = records[0];
  std::map<std::string, std::size_t> col_index;
  for (std::size_t i = 0; i < header.size(); ++i)
    col_index.emplace(std::string(csv::trim(header[i])), i);  // first occurrence wins

  // canonical field -> (column index, scale); -1 when unbound
  std::map<std::string, std::pair<long long, double>> bound;
  for (const auto& [field, binding] : mapping.bindings) {
    const auto it = col_index.find(binding.column);
    if (it == col_index.end()) {
      if (identity_like) continue;  // optional canonical column absent from file
      fail("mapping_column",
           "source column '" + binding.column + "' (field '" + field + "') not in header");
    }
    bound[field] = {static_cast<long long>(it->second), binding.scale};
  }
  if (!bound.count("id")) fail("mapping_column", "id column not found in header");

  auto cell = [&](const std::vector<std::string>& row, const char* field) -> const std::string* {
    const auto it = bound.find(field);
    if (it == bound.end()) return nullptr;
    return &row[static_cast<std::size_t>(it->second.first)];
  };
  auto scale_of = [&](const char* field) {
    const auto it = bound.find(field);
    return it == bound.end() ? 1.0 : it->second.second;
  };

  std::set<std::string> seen_ids;
  auto& report = out.report;

  for (std::size_t r = 1; r < records.size(); ++r) {
    const auto& row = records[r];
    ++report.rows_read;
    const std::size_t rowno = report.rows_read;

    std::string reject_code, reject_detail, row_id;
    std::size_t row_repairs = 0;
    std::vector<std::pair<std::string, std::string>> row_warnings;
    ProductRecord rec;

    auto reject = [&](const std::string& code, const std::string& detail) {
      if (reject_code.empty()) {
        reject_code = code;
        reject_detail = detail;
      }
    };

    if (row.size() != header.size()) {
      reject("arity", "expected " + std::to_string(header.size()) + " cells, got " +
                          std::to_string(row.size()));
    } else {
      if (const auto* c = cell(row, "id")) row_id = std::string(csv::trim(*c));
      rec.id = row_id;
      if (rec.id.empty()) {
        reject("empty_id", "missing product id");
      } else if (!seen_ids.insert(rec.id).second) {
        reject("duplicate_id", "id '" + rec.id + "' already seen; first occurrence kept");
      }

      if (const auto* c = cell(row, "product_name")) rec.name = std::string(csv::trim(*c));
      if (const auto* c = cell(row, "ingredients_text"))
        rec.ingredients_text = std::string(csv::trim(*c));
      if (const auto* c = cell(row, "category")) rec.category = std::string(csv::trim(*c));

      if (const auto* c = cell(row, "nova_group")) {
        const auto p = clean_numeric(*c);
        if (p.malformed) {
          reject("nova_domain", "nova_group '" + std::string(csv::trim(*c)) + "' is not a number");
        } else if (p.value) {
          const double v = *p.value;
          const int iv = static_cast<int>(v);
          if (v != iv || iv < 1 || iv > 4)
            reject("nova_domain", "nova_group must be an integer in 1..4");
          else
            rec.nova = iv;
          if (p.repaired) ++row_repairs;
        }
      }

      for (int n = 0; n < kNutrientCount && reject_code.empty(); ++n) {
        const auto* c = cell(row, kNutrientColumns[n]);
        if (!c) continue;
        const auto p = clean_numeric(*c);
        if (p.malformed) {
          reject("parse", std::string(kNutrientColumns[n]) + ": unparseable cell '" +
                              std::string(csv::trim(*c)) + "'");
          break;
        }
        if (p.value) {
          const double v = *p.value * scale_of(kNutrientColumns[n]);
          if (v < 0.0 || v > 100.0) {
            reject("range", std::string(kNutrientColumns[n]) + " = " + csv::format_double(v) +
                                " outside [0, 100] g/100 g");
            break;
          }
          rec.panel.values[n] = v;
          if (p.repaired) ++row_repairs;
        }
      }

      if (const auto* c = cell(row, "energy_kj"); c && reject_code.empty()) {
        const auto p = clean_numeric(*c);
        if (p.malformed) {
          reject("parse", "energy_kj: unparseable cell '" + std::string(csv::trim(*c)) + "'");
        } else if (p.value) {
          const double v = *p.value * scale_of("energy_kj");
          if (v > 4000.0)
            reject("range", "energy_kj = " + csv::format_double(v) + " above 4000 kJ/100 g");
          else
            rec.energy_kj = v;
          if (p.repaired) ++row_repairs;
        }
      }
      if (const auto* c = cell(row, "fruit_veg_fraction"); c && reject_code.empty()) {
        const auto p = clean_numeric(*c);
        if (p.malformed) {
          reject("parse", "fruit_veg_fraction: unparseable cell");
        } else if (p.value) {
          if (*p.value > 1.0)
            reject("range", "fruit_veg_fraction outside [0, 1]");
          else
            rec.fruit_veg_fraction = *p.value;
          if (p.repaired) ++row_repairs;
        }
      }

      if (reject_code.empty()) {
        bool kind_set = false;
        if (const auto* c = cell(row, "kind")) {
          const std::string s(csv::trim(*c));
          if (!s.empty()) {
            const auto k = parse_kind(s);
            if (!k) reject("domain", "kind '" + s + "' not one of food|beverage|fats_oils_nuts");
            else {
              rec.kind = *k;
              kind_set = true;
            }
          }
        }
        if (!kind_set && !rec.category.empty()) {
          const auto it = options.category_kinds.find(rec.category);
          if (it != options.category_kinds.end()) rec.kind = it->second;
        }
      }

      const std::pair<const char*, bool*> flags[] = {{"is_water", &rec.is_water},
                                                     {"is_raw", &rec.is_raw},
                                                     {"has_mup", &rec.has_mup},
                                                     {"has_risk_mup", &rec.has_risk_mup}};
      for (const auto& [field, dst] : flags) {
        if (!reject_code.empty()) break;
        if (const auto* c = cell(row, field)) {
          const auto b = detail::parse_bool_cell(*c);
          if (!b) reject("domain", std::string(field) + ": expected a boolean cell");
          else *dst = *b;
        }
      }

      if (reject_code.empty()) {
        const auto& p = rec.panel;
        const auto sugars = p[Nutrient::sugars], carb = p[Nutrient::carbohydrate];
        if (sugars && carb && *sugars > *carb + 0.5)
          row_warnings.emplace_back("sugars_exceed_carbohydrate",
                                    "sugars " + csv::format_double(*sugars) + " > carbohydrate " +
                                        csv::format_double(*carb) + " + 0.5");
        const auto fat = p[Nutrient::fat], sat = p[Nutrient::saturated_fat],
                   tr = p[Nutrient::trans_fat];
        if (fat && sat && tr && *sat + *tr > *fat + 0.5)
          row_warnings.emplace_back("saturated_trans_exceed_fat",
                                    "saturated + trans " + csv::format_double(*sat + *tr) +
                                        " > fat " + csv::format_double(*fat) + " + 0.5");
        if (options.strict_consistency && !row_warnings.empty())
          reject("consistency", row_warnings.front().second);
      }
    }

    if (!reject_code.empty()) {
      ++report.rejections[reject_code];
      report.rejected_rows.push_back({rowno, row_id, reject_code, reject_detail});
      continue;
    }
    ++report.rows_kept;
    if (row_repairs) report.repairs["decimal_comma"] += row_repairs;
    for (const auto& [code, detail] : row_warnings) {
      ++report.warnings[code];
      report.warned_rows.push_back({rowno, row_id, code, detail});
    }
    out.products.push_back(std::move(rec));
  }
  return out;
}

// Canonical-layout load: same-named columns, comma-delimited.
inline IngestResult load_products_canonical(const std::string& text,
                                            const IngestOptions& options = {}) {
  return load_products(text, ColumnMapping::identity(), options);
}

// ---------------------------------------------------------------------------
// serialization (canonical columns, lossless round-trip)

inline std::string serialize_products(const ProductTable& table) {
  std::string out;
  csv::write_row(out, ColumnMapping::canonical_fields());
  std::vector<std::string> row;
  for (const auto& r : table) {
    row.clear();
    row.push_back(r.id);
    row.push_back(r.name);
    row.push_back(r.ingredients_text);
    row.push_back(r.nova ? csv::format_int(*r.nova) : "");
    for (int n = 0; n < kNutrientCount; ++n)
      row.push_back(r.panel.values[n] ? csv::format_double(*r.panel.values[n]) : "");
    row.push_back(kind_name(r.kind));
    row.push_back(r.category);
    row.push_back(r.energy_kj ? csv::format_double(*r.energy_kj) : "");
    row.push_back(r.fruit_veg_fraction ? csv::format_double(*r.fruit_veg_fraction) : "");
    row.push_back(r.is_water ? "1" : "0");
    row.push_back(r.is_raw ? "1" : "0");
    row.push_back(r.has_mup ? "1" : "0");
    row.push_back(r.has_risk_mup ? "1" : "0");
    csv::write_row(out, row);
  }
  return out;
}

}  // namespace fproxkit
