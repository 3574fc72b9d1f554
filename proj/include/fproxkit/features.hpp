#pragma once

// Model-ready feature assembly from product records: nutrient panels,
// engineered ingredient/additive counts, externally produced text-embedding
// vectors, and the descriptive sentence used by text encoders. Rows are
// always emitted in ascending-id order, so matrices never depend on input
// file ordering.

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"
#include "fproxkit/forest.hpp"
#include "fproxkit/ingredients.hpp"
#include "fproxkit/nutrients.hpp"

namespace fproxkit {

// ---------------------------------------------------------------------------
// sentence template

struct SentenceOptions {
  // When set, absent nutrients render as "unknown of <name>" instead of being
  // skipped; the default emits present nutrients only.
  bool emit_missing_as_unknown = false;
};

namespace detail {

// Up to two decimals, trailing zeros (and a bare point) trimmed: 50 -> "50",
// 3.410 -> "3.41", 0.5 -> "0.5".
inline std::string format_grams(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  std::string s = buf;
  while (!s.empty() && s.back() == '0') s.pop_back();
  if (!s.empty() && s.back() == '.') s.pop_back();
  return s;
}

}  // namespace detail

// Fixed template:
//   "<NAME> has the ingredients: <LIST>, and the nutrients: <clauses>."
// <LIST> is the canonically re-rendered ingredient parse; nutrient clauses are
// "<value>g of <nutrient>" in canonical panel order. A missing ingredient
// list, or an entirely absent panel, renders as the token "unknown".
inline std::string build_sentence(const ProductRecord& rec, const SentenceOptions& opts = {}) {
  if (rec.name.empty()) fail("sentence_name", "product name is empty");

  std::string ingredients = "unknown";
  if (!rec.ingredients_text.empty()) {
    const std::string rendered = to_string(parse_ingredients(rec.ingredients_text));
    if (!rendered.empty()) ingredients = rendered;
  }

  std::string clauses;
  for (int n = 0; n < kNutrientCount; ++n) {
    const auto& v = rec.panel.values[n];
    if (!v && !opts.emit_missing_as_unknown) continue;
    if (!clauses.empty()) clauses += ", ";
    if (v)
      clauses += detail::format_grams(*v) + "g of " + kNutrientSentenceNames[n];
    else
      clauses += std::string("unknown of ") + kNutrientSentenceNames[n];
  }
  if (clauses.empty()) clauses = "unknown";

  return rec.name + " has the ingredients: " + ingredients +
         ", and the nutrients: " + clauses + ".";
}

// ---------------------------------------------------------------------------
// embedding ingestion

struct EmbeddingTable {
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> vectors;  // id -> vector (unique ids)

  // CSV body "id,v0,...,v(dim-1)" preceded by a declaration line "dim=<d>".
  static EmbeddingTable from_csv_text(const std::string& text) {
    const auto rows = csv::parse(text);
    if (rows.empty() || rows[0].empty())
      fail("embedding_header", "embedding file must start with a dim=<d> line");
    const std::string_view header = csv::trim(rows[0][0]);
    if (rows[0].size() != 1 || header.substr(0, 4) != "dim=")
      fail("embedding_header", "embedding file must start with a dim=<d> line");
    const auto d = csv::parse_int(header.substr(4));
    if (!d || *d < 1) fail("embedding_header", "invalid embedding dimension");

    EmbeddingTable t;
    t.dim = static_cast<std::size_t>(*d);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const std::string rowno = std::to_string(r + 1);
      if (rows[r].size() != t.dim + 1)
        fail("embedding_row", "row " + rowno + ": expected " + std::to_string(t.dim + 1) +
                                  " cells (id + " + std::to_string(t.dim) + " values), got " +
                                  std::to_string(rows[r].size()));
      const std::string id(csv::trim(rows[r][0]));
      if (id.empty()) fail("embedding_row", "row " + rowno + ": empty id");
      std::vector<double> vec(t.dim);
      for (std::size_t c = 0; c < t.dim; ++c) {
        const auto v = csv::parse_double(csv::trim(rows[r][c + 1]));
        if (!v || !std::isfinite(*v))
          fail("embedding_row", "row " + rowno + ": value " + std::to_string(c) +
                                    " is not a finite number");
        vec[c] = *v;
      }
      if (!t.vectors.emplace(id, std::move(vec)).second)
        fail("embedding_duplicate", "row " + rowno + ": duplicate id '" + id + "'");
    }
    return t;
  }

  std::string serialize() const {
    std::string out = "dim=" + std::to_string(dim) + "\n";
    std::vector<std::string> row;
    for (const auto& [id, vec] : vectors) {
      row.clear();
      row.push_back(id);
      for (const double v : vec) row.push_back(csv::format_double(v));
      csv::write_row(out, row);
    }
    return out;
  }
};

inline EmbeddingTable load_embeddings(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("embedding_io", "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return EmbeddingTable::from_csv_text(ss.str());
}

// ---------------------------------------------------------------------------
// feature specs and assembly

enum class FeatureSource {
  nutrients11,                 // 11 panel columns
  nutrients11_plus_additives,  // panel + additive count
  ingredient_count_only,       // 1 column
  additive_count_only,         // 1 column
  embedding,                   // embedding_dim columns
};

struct FeatureSpec {
  FeatureSource source = FeatureSource::nutrients11;
  std::size_t embedding_dim = 0;  // 0 = adopt the embedding table's dimension

  std::string name() const {
    switch (source) {
      case FeatureSource::nutrients11: return "nutrients11";
      case FeatureSource::nutrients11_plus_additives: return "nutrients11_plus_additives";
      case FeatureSource::ingredient_count_only: return "ingredient_count_only";
      case FeatureSource::additive_count_only: return "additive_count_only";
      case FeatureSource::embedding: return "embedding";
    }
    return "?";
  }
};

// Accepts the source names above; "embedding" optionally suffixed ":<dim>".
inline FeatureSpec parse_feature_spec(std::string_view text) {
  FeatureSpec spec;
  const std::string s(csv::trim(text));
  if (s == "nutrients11") {
    spec.source = FeatureSource::nutrients11;
  } else if (s == "nutrients11_plus_additives") {
    spec.source = FeatureSource::nutrients11_plus_additives;
  } else if (s == "ingredient_count_only") {
    spec.source = FeatureSource::ingredient_count_only;
  } else if (s == "additive_count_only") {
    spec.source = FeatureSource::additive_count_only;
  } else if (s == "embedding") {
    spec.source = FeatureSource::embedding;
  } else if (s.rfind("embedding:", 0) == 0) {
    spec.source = FeatureSource::embedding;
    const auto d = csv::parse_int(std::string_view(s).substr(10));
    if (!d || *d < 1) fail("feature_spec", "invalid embedding dimension in spec: " + s);
    spec.embedding_dim = static_cast<std::size_t>(*d);
  } else {
    fail("feature_spec", "unknown feature spec: " + s);
  }
  return spec;
}

struct DroppedRow {
  std::string id;
  std::string reason;  // no_label | no_ingredients | no_embedding
};

struct AssembleResult {
  FeatureMatrix features;    // rows in ascending-id order, ids attached
  std::vector<int> labels;   // aligned with rows; 0 when labels not required
  std::vector<DroppedRow> dropped;
};

// Builds the matrix for a spec. Rows lacking a required input are dropped and
// reported (kept + dropped = input). Partial nutrient panels are kept with
// explicit missing cells. With require_labels unset, unlabeled rows are kept
// (label 0) for inference-time use.
inline AssembleResult assemble(const ProductTable& table, const FeatureSpec& spec,
                               const AdditiveLexicon* lexicon = nullptr,
                               const EmbeddingTable* embeddings = nullptr,
                               bool require_labels = true) {
  const bool needs_ingredients = spec.source == FeatureSource::nutrients11_plus_additives ||
                                 spec.source == FeatureSource::ingredient_count_only ||
                                 spec.source == FeatureSource::additive_count_only;
  const bool needs_lexicon = spec.source == FeatureSource::nutrients11_plus_additives ||
                             spec.source == FeatureSource::additive_count_only;
  if (needs_lexicon && !lexicon)
    fail("assemble_lexicon", "feature spec '" + spec.name() + "' needs an additive lexicon");
  std::size_t dim = 0;
  if (spec.source == FeatureSource::embedding) {
    if (!embeddings)
      fail("assemble_embeddings", "feature spec 'embedding' needs an embedding table");
    if (spec.embedding_dim != 0 && spec.embedding_dim != embeddings->dim)
      fail("assemble_dim", "spec expects dimension " + std::to_string(spec.embedding_dim) +
                               ", embedding table has " + std::to_string(embeddings->dim));
    dim = embeddings->dim;
  }

  AssembleResult out;
  auto& schema = out.features.schema;
  switch (spec.source) {
    case FeatureSource::nutrients11:
    case FeatureSource::nutrients11_plus_additives:
      for (int n = 0; n < kNutrientCount; ++n) schema.push_back({kNutrientKeys[n], "g/100g"});
      if (spec.source == FeatureSource::nutrients11_plus_additives)
        schema.push_back({"additive_count", "count"});
      break;
    case FeatureSource::ingredient_count_only:
      schema.push_back({"ingredient_count", "count"});
      break;
    case FeatureSource::additive_count_only:
      schema.push_back({"additive_count", "count"});
      break;
    case FeatureSource::embedding:
      for (std::size_t i = 0; i < dim; ++i)
        schema.push_back({"e" + std::to_string(i), "embedding"});
      break;
  }

  std::vector<const ProductRecord*> ordered;
  ordered.reserve(table.size());
  for (const auto& rec : table) ordered.push_back(&rec);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const ProductRecord* a, const ProductRecord* b) { return a->id < b->id; });

  for (const ProductRecord* rec : ordered) {
    if (require_labels && !rec->nova) {
      out.dropped.push_back({rec->id, "no_label"});
      continue;
    }
    if (needs_ingredients && rec->ingredients_text.empty()) {
      out.dropped.push_back({rec->id, "no_ingredients"});
      continue;
    }
    const std::vector<double>* emb = nullptr;
    if (spec.source == FeatureSource::embedding) {
      const auto it = embeddings->vectors.find(rec->id);
      if (it == embeddings->vectors.end()) {
        out.dropped.push_back({rec->id, "no_embedding"});
        continue;
      }
      emb = &it->second;
    }

    std::vector<std::optional<double>> row;
    row.reserve(schema.size());
    switch (spec.source) {
      case FeatureSource::nutrients11:
      case FeatureSource::nutrients11_plus_additives:
        for (int n = 0; n < kNutrientCount; ++n) row.push_back(rec->panel.values[n]);
        if (spec.source == FeatureSource::nutrients11_plus_additives)
          row.push_back(static_cast<double>(
              count_additives(parse_ingredients(rec->ingredients_text), *lexicon)));
        break;
      case FeatureSource::ingredient_count_only:
        row.push_back(
            static_cast<double>(count_ingredients(parse_ingredients(rec->ingredients_text))));
        break;
      case FeatureSource::additive_count_only:
        row.push_back(static_cast<double>(
            count_additives(parse_ingredients(rec->ingredients_text), *lexicon)));
        break;
      case FeatureSource::embedding:
        for (const double v : *emb) row.push_back(v);
        break;
    }
    out.features.rows.push_back(std::move(row));
    out.features.row_ids.push_back(rec->id);
    out.labels.push_back(rec->nova.value_or(0));
  }
  return out;
}

// Assembled matrix as CSV: header "id,<feature names...>", missing cells empty.
inline std::string serialize_matrix(const FeatureMatrix& m) {
  std::string out;
  std::vector<std::string> row;
  row.push_back("id");
  for (const auto& col : m.schema) row.push_back(col.name);
  csv::write_row(out, row);
  for (std::size_t r = 0; r < m.n_rows(); ++r) {
    row.clear();
    row.push_back(r < m.row_ids.size() ? m.row_ids[r] : "");
    for (const auto& cell : m.rows[r]) row.push_back(cell ? csv::format_double(*cell) : "");
    csv::write_row(out, row);
  }
  return out;
}

}  // namespace fproxkit
