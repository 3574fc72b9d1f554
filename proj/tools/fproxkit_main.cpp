// fproxkit command-line tool: batch pipelines over product tables.
//
// Subcommands: ingest, parse-ingredients, nutriscore, siga, profile, train,
// predict, fpro, evaluate, report. One job per process. Every command that
// writes output also writes "<out>.manifest.json" recording the command line,
// SHA-256 digests of all inputs and outputs, the seed (when used), the tool
// version and wall-clock timestamps. Output files themselves never contain
// timestamps or machine-dependent content, so identical inputs plus an
// identical seed reproduce identical output bytes.
//
// Exit codes: 0 success; 1 validation/usage error (a machine-readable JSON
// error report goes to stderr); 2 internal error.

#include <array>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>
#include <openssl/evp.h>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"
#include "fproxkit/eval.hpp"
#include "fproxkit/features.hpp"
#include "fproxkit/fpro.hpp"
#include "fproxkit/forest.hpp"
#include "fproxkit/ingest.hpp"
#include "fproxkit/ingredients.hpp"
#include "fproxkit/nutrients.hpp"
#include "fproxkit/parallel.hpp"
#include "fproxkit/profiler.hpp"
#include "fproxkit/report.hpp"
#include "fproxkit/scoring.hpp"
#include "fproxkit/version.hpp"

namespace {

using nlohmann::json;

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fproxkit::fail("io", "cannot open for reading: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fproxkit::fail("io", "cannot open for writing: " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fproxkit::fail("io", "write failed: " + path);
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr))
    fproxkit::fail("digest", "sha256 computation failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0x0f];
  }
  return out;
}

std::string utc_iso8601(std::time_t t) {
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string quote_word(const std::string& w) {
  if (!w.empty() && w.find_first_of(" \t\"'\\") == std::string::npos) return w;
  std::string out = "\"";
  for (const char c : w) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  out += '"';
  return out;
}

// Collects input/output digests while the command runs, then writes
// "<first output>.manifest.json".
class Manifest {
 public:
  Manifest(int argc, char** argv) : started_(std::time(nullptr)), t0_(clock_now()) {
    for (int i = 0; i < argc; ++i) {
      if (i) command_ += ' ';
      command_ += quote_word(argv[i]);
    }
  }

  std::string read_input(const std::string& path) {
    std::string text = read_file(path);
    inputs_[path] = sha256_hex(text);
    return text;
  }

  void write_output(const std::string& path, const std::string& content) {
    write_file(path, content);
    outputs_[path] = sha256_hex(content);
    if (primary_.empty()) primary_ = path;
  }

  json& params() { return params_; }
  void set_seed(std::uint64_t seed) { seed_ = seed; }

  void finish() {
    if (primary_.empty()) return;
    json m;
    m["command"] = command_;
    m["digest_scheme"] = "sha256";
    m["inputs"] = inputs_;
    m["outputs"] = outputs_;
    m["params"] = params_.is_null() ? json::object() : params_;
    m["seed"] = seed_ ? json(*seed_) : json(nullptr);
    m["version"] = fproxkit::kVersion;
    m["started_utc"] = utc_iso8601(started_);
    m["finished_utc"] = utc_iso8601(std::time(nullptr));
    m["duration_seconds"] = std::chrono::duration<double>(clock_now() - t0_).count();
    write_file(primary_ + ".manifest.json", m.dump(2) + "\n");
  }

 private:
  static std::chrono::steady_clock::time_point clock_now() {
    return std::chrono::steady_clock::now();
  }

  std::string command_;
  std::time_t started_;
  std::chrono::steady_clock::time_point t0_;
  std::map<std::string, std::string> inputs_;
  std::map<std::string, std::string> outputs_;
  json params_;
  std::optional<std::uint64_t> seed_;
  std::string primary_;
};

int cli_threads(int flag_value) {
  if (flag_value > 0) return flag_value;
  if (const char* env = std::getenv("FPROXKIT_THREADS")) {
    const auto v = fproxkit::csv::parse_int(fproxkit::csv::trim(env));
    if (!v || *v < 1)
      fproxkit::fail("threads", std::string("FPROXKIT_THREADS must be a positive integer, got '") +
                                    env + "'");
    return static_cast<int>(*v);
  }
  return fproxkit::resolve_threads(0);
}

// Canonical product tables must reload without rejections; anything else
// means the file did not come from `ingest`.
fproxkit::ProductTable load_table(Manifest& m, const std::string& path) {
  auto res = fproxkit::load_products_canonical(m.read_input(path));
  if (res.report.rejected_total() != 0) {
    const auto& first = res.report.rejected_rows.front();
    fproxkit::fail("input_rows",
                   std::to_string(res.report.rejected_total()) + " row(s) in '" + path +
                       "' failed canonical validation (first: row " + std::to_string(first.row) +
                       ", " + first.code + ": " + first.detail + "); re-run ingest");
  }
  return std::move(res.products);
}

// Recognizes which feature source produced a model's schema, so predict/fpro
// need no --spec flag.
fproxkit::FeatureSpec spec_from_schema(const std::vector<fproxkit::FeatureColumn>& schema) {
  using fproxkit::FeatureSource;
  fproxkit::FeatureSpec spec;
  auto is_panel = [&](std::size_t upto) {
    for (std::size_t i = 0; i < upto; ++i)
      if (schema[i].name != fproxkit::kNutrientKeys[i] || schema[i].unit != "g/100g") return false;
    return true;
  };
  if (schema.size() == 11 && is_panel(11)) {
    spec.source = FeatureSource::nutrients11;
    return spec;
  }
  if (schema.size() == 12 && is_panel(11) && schema[11].name == "additive_count" &&
      schema[11].unit == "count") {
    spec.source = FeatureSource::nutrients11_plus_additives;
    return spec;
  }
  if (schema.size() == 1 && schema[0].unit == "count") {
    if (schema[0].name == "ingredient_count") {
      spec.source = FeatureSource::ingredient_count_only;
      return spec;
    }
    if (schema[0].name == "additive_count") {
      spec.source = FeatureSource::additive_count_only;
      return spec;
    }
  }
  if (!schema.empty()) {
    bool emb = true;
    for (std::size_t i = 0; i < schema.size(); ++i)
      if (schema[i].unit != "embedding" || schema[i].name != "e" + std::to_string(i)) emb = false;
    if (emb) {
      spec.source = FeatureSource::embedding;
      spec.embedding_dim = schema.size();
      return spec;
    }
  }
  fproxkit::fail("model_schema", "model schema does not match any known feature source");
}

struct Options {
  std::string input, mapping, category_kinds, lexicon, point_tables, embeddings, model, out;
  std::string spec = "nutrients11";
  std::string format = "csv";
  bool strict = false;
  int threads = 0;
  std::uint64_t seed = 42;
  double bin_width = 0.25;
  std::size_t n_trees = 100, max_depth = 0, min_samples_leaf = 1, features_per_split = 0;
  std::vector<std::string> metrics;
  std::string scores, curves;
  std::size_t min_n = 20;
};

// ---------------------------------------------------------------------------
// subcommands

void run_ingest(const Options& o, Manifest& m) {
  const std::string text = m.read_input(o.input);
  fproxkit::ColumnMapping mapping = o.mapping.empty()
                                        ? fproxkit::ColumnMapping::identity()
                                        : fproxkit::ColumnMapping::from_json_text(
                                              m.read_input(o.mapping));
  fproxkit::IngestOptions opts;
  opts.strict_consistency = o.strict;
  if (!o.category_kinds.empty())
    opts.category_kinds = fproxkit::load_category_kinds(m.read_input(o.category_kinds));

  const auto res = fproxkit::load_products(text, mapping, opts);
  m.write_output(o.out, fproxkit::serialize_products(res.products));
  m.write_output(o.out + ".report.json", res.report.to_json().dump(2) + "\n");
  m.params() = {{"strict", o.strict},
                {"mapping", o.mapping.empty() ? "canonical" : o.mapping},
                {"rows_read", res.report.rows_read},
                {"rows_kept", res.report.rows_kept}};
}

void run_parse_ingredients(const Options& o, Manifest& m) {
  const auto table = load_table(m, o.input);
  std::optional<fproxkit::AdditiveLexicon> lexicon;
  if (!o.lexicon.empty())
    lexicon = fproxkit::AdditiveLexicon::from_csv_text(m.read_input(o.lexicon));

  if (o.format == "json") {
    json rows = json::array();
    for (const auto& rec : table) {
      const auto tree = fproxkit::parse_ingredients(rec.ingredients_text);
      json r{{"id", rec.id},
             {"n_ingredients", fproxkit::count_ingredients(tree)},
             {"unbalanced", tree.unbalanced},
             {"ingredients", fproxkit::to_string(tree)}};
      if (lexicon) {
        const auto matches = fproxkit::match_additives(tree, *lexicon);
        json names = json::array();
        for (const auto& a : matches) names.push_back(a.name);
        r["n_additives"] = matches.size();
        r["additives"] = std::move(names);
      }
      rows.push_back(std::move(r));
    }
    m.write_output(o.out, rows.dump(2) + "\n");
  } else {
    std::string out;
    fproxkit::csv::write_row(
        out, {"id", "n_ingredients", "n_additives", "unbalanced", "ingredients", "additives"});
    for (const auto& rec : table) {
      const auto tree = fproxkit::parse_ingredients(rec.ingredients_text);
      std::string n_add, names;
      if (lexicon) {
        const auto matches = fproxkit::match_additives(tree, *lexicon);
        n_add = fproxkit::csv::format_int(static_cast<long long>(matches.size()));
        for (std::size_t i = 0; i < matches.size(); ++i) {
          if (i) names += "; ";
          names += matches[i].name;
        }
      }
      fproxkit::csv::write_row(
          out, {rec.id,
                fproxkit::csv::format_int(static_cast<long long>(fproxkit::count_ingredients(tree))),
                n_add, tree.unbalanced ? "1" : "0", fproxkit::to_string(tree), names});
    }
    m.write_output(o.out, out);
  }
  m.params() = {{"lexicon", o.lexicon.empty() ? json(nullptr) : json(o.lexicon)},
                {"rows", table.size()}};
}

void run_nutriscore(const Options& o, Manifest& m) {
  const auto table = load_table(m, o.input);
  const auto tables = fproxkit::PointTables::from_json_text(m.read_input(o.point_tables));

  if (o.format == "json") {
    json rows = json::array();
    for (const auto& rec : table) {
      const auto r = fproxkit::nutriscore(rec, tables);
      json row{{"id", rec.id}, {"scale", fproxkit::scale_name(r.scale)}, {"scorable", r.scorable}};
      if (r.scorable) {
        row["n_points"] = r.n_points;
        row["p_points"] = r.p_points;
        row["score"] = r.score;
        row["label"] = fproxkit::label_name(r.label);
      } else {
        row["missing_component"] = r.missing_component;
      }
      rows.push_back(std::move(row));
    }
    m.write_output(o.out, rows.dump(2) + "\n");
  } else {
    std::string out;
    fproxkit::csv::write_row(out, {"id", "scale", "scorable", "missing_component", "n_points",
                                   "p_points", "score", "label"});
    for (const auto& rec : table) {
      const auto r = fproxkit::nutriscore(rec, tables);
      if (r.scorable)
        fproxkit::csv::write_row(out, {rec.id, fproxkit::scale_name(r.scale), "1", "",
                                       fproxkit::csv::format_int(r.n_points),
                                       fproxkit::csv::format_int(r.p_points),
                                       fproxkit::csv::format_int(r.score),
                                       fproxkit::label_name(r.label)});
      else
        fproxkit::csv::write_row(out, {rec.id, fproxkit::scale_name(r.scale), "0",
                                       r.missing_component, "", "", "", ""});
    }
    m.write_output(o.out, out);
  }
  m.params() = {{"point_tables", o.point_tables}, {"rows", table.size()}};
}

void run_siga(const Options& o, Manifest& m) {
  const auto table = load_table(m, o.input);

  auto classify = [](const fproxkit::ProductRecord& rec) {
    try {
      return fproxkit::siga_record(rec);
    } catch (const fproxkit::Error& e) {
      fproxkit::fail(e.code(), "row '" + rec.id + "': " + e.what());
    }
  };

  if (o.format == "json") {
    json rows = json::array();
    for (const auto& rec : table) {
      const auto r = classify(rec);
      json row{{"id", rec.id}, {"scorable", r.scorable}};
      if (r.scorable) {
        row["balanced"] = r.balanced;
        row["siga_class"] = r.siga_class;
      } else {
        row["missing_component"] = r.missing_component;
      }
      rows.push_back(std::move(row));
    }
    m.write_output(o.out, rows.dump(2) + "\n");
  } else {
    std::string out;
    fproxkit::csv::write_row(out, {"id", "scorable", "missing_component", "balanced", "siga_class"});
    for (const auto& rec : table) {
      const auto r = classify(rec);
      if (r.scorable)
        fproxkit::csv::write_row(out, {rec.id, "1", "", r.balanced ? "1" : "0",
                                       fproxkit::csv::format_int(r.siga_class)});
      else
        fproxkit::csv::write_row(out, {rec.id, "0", r.missing_component, "", ""});
    }
    m.write_output(o.out, out);
  }
  m.params() = {{"rows", table.size()}};
}

void run_profile(const Options& o, Manifest& m) {
  const auto table = load_table(m, o.input);
  const auto fit = fproxkit::fit_stats(table);

  json j{{"stats", fit.stats.to_json()}, {"warnings", fit.warnings}};
  m.write_output(o.out, j.dump(2) + "\n");

  std::string hist;
  fproxkit::csv::write_row(hist, {"nutrient", "lo_log10", "hi_log10", "count"});
  for (int n = 0; n < fproxkit::kNutrientCount; ++n) {
    const auto bins =
        fproxkit::log_histogram(table, static_cast<fproxkit::Nutrient>(n), o.bin_width);
    for (const auto& b : bins)
      fproxkit::csv::write_row(hist, {fproxkit::kNutrientKeys[n],
                                      fproxkit::csv::format_double(b.lo_log10),
                                      fproxkit::csv::format_double(b.hi_log10),
                                      fproxkit::csv::format_int(static_cast<long long>(b.count))});
  }
  m.write_output(o.out + ".hist.csv", hist);
  m.params() = {{"bin_width", o.bin_width}, {"rows", table.size()}};
}

struct AssembledInputs {
  fproxkit::FeatureSpec spec;
  fproxkit::AssembleResult assembled;
};

AssembledInputs assemble_from_flags(const Options& o, Manifest& m,
                                    const fproxkit::FeatureSpec& spec, bool require_labels) {
  const auto table = load_table(m, o.input);
  std::optional<fproxkit::AdditiveLexicon> lexicon;
  if (!o.lexicon.empty())
    lexicon = fproxkit::AdditiveLexicon::from_csv_text(m.read_input(o.lexicon));
  std::optional<fproxkit::EmbeddingTable> embeddings;
  if (!o.embeddings.empty())
    embeddings = fproxkit::EmbeddingTable::from_csv_text(m.read_input(o.embeddings));

  AssembledInputs out;
  out.spec = spec;
  out.assembled = fproxkit::assemble(table, spec, lexicon ? &*lexicon : nullptr,
                                     embeddings ? &*embeddings : nullptr, require_labels);
  json dropped = json::object();
  for (const auto& d : out.assembled.dropped) {
    if (!dropped.contains(d.reason)) dropped[d.reason] = 0;
    dropped[d.reason] = dropped[d.reason].get<std::size_t>() + 1;
  }
  m.params()["spec"] = spec.name();
  m.params()["rows_used"] = out.assembled.features.n_rows();
  m.params()["rows_dropped"] = dropped;
  return out;
}

void run_train(const Options& o, Manifest& m) {
  const auto inputs = assemble_from_flags(o, m, fproxkit::parse_feature_spec(o.spec),
                                          /*require_labels=*/true);
  fproxkit::ForestParams params;
  params.n_trees = o.n_trees;
  params.max_depth = o.max_depth;
  params.min_samples_leaf = o.min_samples_leaf;
  params.features_per_split = o.features_per_split;
  params.seed = o.seed;

  const auto model = fproxkit::train(inputs.assembled.features, inputs.assembled.labels, params,
                                     cli_threads(o.threads));
  m.write_output(o.out, fproxkit::serialize_model(model) + "\n");
  m.set_seed(o.seed);
  m.params()["forest"] = fproxkit::params_to_json(model.params);
  m.params()["degenerate"] = model.degenerate;
}

void write_probability_rows(const Options& o, Manifest& m,
                            const std::vector<std::string>& row_ids,
                            const std::vector<fproxkit::NovaProbabilities>& probs) {
  if (o.format == "json") {
    json rows = json::array();
    for (std::size_t r = 0; r < probs.size(); ++r)
      rows.push_back({{"id", row_ids[r]},
                      {"p", probs[r].p},
                      {"predicted_class", fproxkit::predict_class(probs[r])}});
    m.write_output(o.out, rows.dump(2) + "\n");
  } else {
    std::string out;
    fproxkit::csv::write_row(out, {"id", "p1", "p2", "p3", "p4", "predicted_class"});
    for (std::size_t r = 0; r < probs.size(); ++r)
      fproxkit::csv::write_row(
          out, {row_ids[r], fproxkit::csv::format_double(probs[r].p[0]),
                fproxkit::csv::format_double(probs[r].p[1]),
                fproxkit::csv::format_double(probs[r].p[2]),
                fproxkit::csv::format_double(probs[r].p[3]),
                fproxkit::csv::format_int(fproxkit::predict_class(probs[r]))});
    m.write_output(o.out, out);
  }
}

void run_predict(const Options& o, Manifest& m) {
  const auto model = fproxkit::parse_model(m.read_input(o.model));
  const auto inputs =
      assemble_from_flags(o, m, spec_from_schema(model.schema), /*require_labels=*/false);
  const auto probs =
      fproxkit::predict_proba(model, inputs.assembled.features, cli_threads(o.threads));
  write_probability_rows(o, m, inputs.assembled.features.row_ids, probs);
  if (o.format != "json") {
    std::string dropped;
    fproxkit::csv::write_row(dropped, {"id", "reason"});
    for (const auto& d : inputs.assembled.dropped)
      fproxkit::csv::write_row(dropped, {d.id, d.reason});
    m.write_output(o.out + ".dropped.csv", dropped);
  }
}

void run_fpro(const Options& o, Manifest& m) {
  const auto model = fproxkit::parse_model(m.read_input(o.model));
  const auto inputs =
      assemble_from_flags(o, m, spec_from_schema(model.schema), /*require_labels=*/false);
  const auto ranking =
      fproxkit::rank_by_fpro(model, inputs.assembled.features, cli_threads(o.threads));

  std::vector<fproxkit::NovaProbabilities> probs;
  probs.reserve(ranking.entries.size());
  for (const auto& e : ranking.entries) probs.push_back(e.probs);
  const auto space = fproxkit::pca_decision_space(probs);

  if (o.format == "json") {
    json entries = json::array();
    for (std::size_t r = 0; r < ranking.entries.size(); ++r)
      entries.push_back({{"id", ranking.entries[r].id},
                         {"p", ranking.entries[r].probs.p},
                         {"fpro", ranking.entries[r].score},
                         {"pc1", space.coords[r][0]},
                         {"pc2", space.coords[r][1]}});
    json rejects = json::array();
    for (const auto& rej : ranking.rejects)
      rejects.push_back({{"row", rej.row}, {"id", rej.id}, {"reason", rej.reason}});
    json j{{"entries", std::move(entries)},
           {"rejects", std::move(rejects)},
           {"explained", space.explained},
           {"axes", space.axes}};
    m.write_output(o.out, j.dump(2) + "\n");
  } else {
    std::string out;
    fproxkit::csv::write_row(out, {"id", "p1", "p2", "p3", "p4", "fpro", "pc1", "pc2"});
    for (std::size_t r = 0; r < ranking.entries.size(); ++r) {
      const auto& e = ranking.entries[r];
      fproxkit::csv::write_row(
          out, {e.id, fproxkit::csv::format_double(e.probs.p[0]),
                fproxkit::csv::format_double(e.probs.p[1]),
                fproxkit::csv::format_double(e.probs.p[2]),
                fproxkit::csv::format_double(e.probs.p[3]), fproxkit::csv::format_double(e.score),
                fproxkit::csv::format_double(space.coords[r][0]),
                fproxkit::csv::format_double(space.coords[r][1])});
    }
    m.write_output(o.out, out);
    std::string rejects;
    fproxkit::csv::write_row(rejects, {"row", "id", "reason"});
    for (const auto& rej : ranking.rejects)
      fproxkit::csv::write_row(rejects, {fproxkit::csv::format_int(static_cast<long long>(rej.row)),
                                         rej.id, rej.reason});
    m.write_output(o.out + ".rejects.csv", rejects);
  }
  m.params()["n_ranked"] = ranking.entries.size();
  m.params()["n_rejected"] = ranking.rejects.size();
}

void run_evaluate(const Options& o, Manifest& m) {
  const auto inputs = assemble_from_flags(o, m, fproxkit::parse_feature_spec(o.spec),
                                          /*require_labels=*/true);
  const auto plan = fproxkit::make_split_plan(inputs.assembled.labels, o.seed);
  const auto grid = fproxkit::default_grid(o.seed);
  const auto report = fproxkit::evaluate(inputs.assembled.features, inputs.assembled.labels, plan,
                                         grid, inputs.spec.name(), cli_threads(o.threads));

  m.write_output(o.out, report.to_json().dump(2) + "\n");
  m.write_output(o.out + ".folds.csv",
                 fproxkit::serialize_split_plan(plan, inputs.assembled.features.row_ids));
  m.set_seed(o.seed);
  m.params()["grid_size"] = grid.size();
  m.params()["timings"] = {{"grid_seconds", report.timings.grid_seconds},
                           {"folds_seconds", report.timings.folds_seconds}};
}

// --- report helpers --------------------------------------------------------

std::size_t find_column(const std::vector<std::string>& header, const std::string& name,
                        const std::string& path) {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (fproxkit::csv::trim(header[i]) == name) return i;
  fproxkit::fail("report_columns", "'" + path + "' has no '" + name + "' column");
}

void run_report_metrics(const Options& o, Manifest& m) {
  std::vector<fproxkit::EvalReport> reports;
  for (const auto& path : o.metrics)
    reports.push_back(fproxkit::parse_eval_report(m.read_input(path)));
  m.write_output(o.out, fproxkit::metrics_table(reports));
  m.params()["mode"] = "metrics";
  m.params()["n_reports"] = reports.size();
}

void run_report_categories(const Options& o, Manifest& m) {
  const auto table = load_table(m, o.input);
  std::map<std::string, const fproxkit::ProductRecord*> by_id;
  for (const auto& rec : table) by_id[rec.id] = &rec;

  const auto rows = fproxkit::csv::parse(m.read_input(o.scores));
  if (rows.empty()) fproxkit::fail("report_columns", "'" + o.scores + "' is empty");
  const auto id_col = find_column(rows[0], "id", o.scores);
  const auto fpro_col = find_column(rows[0], "fpro", o.scores);

  std::vector<fproxkit::ScoredCategory> scored;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].size() != rows[0].size())
      fproxkit::fail("report_columns", "'" + o.scores + "' row " + std::to_string(r + 1) +
                                           " has the wrong number of cells");
    const std::string id(fproxkit::csv::trim(rows[r][id_col]));
    const auto it = by_id.find(id);
    if (it == by_id.end())
      fproxkit::fail("report_join", "score row id '" + id + "' not present in '" + o.input + "'");
    const auto score = fproxkit::csv::parse_double(fproxkit::csv::trim(rows[r][fpro_col]));
    if (!score)
      fproxkit::fail("report_columns",
                     "'" + o.scores + "' row " + std::to_string(r + 1) + ": unparseable fpro cell");
    scored.push_back({it->second->category, *score});
  }
  const auto summary = fproxkit::category_fpro_summary(scored, o.min_n);
  if (o.format == "json")
    m.write_output(o.out, fproxkit::category_summary_json(summary).dump(2) + "\n");
  else
    m.write_output(o.out, fproxkit::category_summary_csv(summary));
  m.params()["mode"] = "categories";
  m.params()["min_n"] = o.min_n;
  m.params()["warnings"] = summary.warnings;
}

void run_report_curves(const Options& o, Manifest& m) {
  const auto table = load_table(m, o.input);
  std::map<std::string, int> label_by_id;
  for (const auto& rec : table)
    if (rec.nova) label_by_id[rec.id] = *rec.nova;

  const auto rows = fproxkit::csv::parse(m.read_input(o.curves));
  if (rows.empty()) fproxkit::fail("report_columns", "'" + o.curves + "' is empty");
  const auto id_col = find_column(rows[0], "id", o.curves);
  std::array<std::size_t, 4> p_col{};
  for (int c = 0; c < 4; ++c)
    p_col[c] = find_column(rows[0], "p" + std::to_string(c + 1), o.curves);

  std::vector<int> labels;
  std::array<std::vector<double>, 4> scores;
  std::size_t unlabeled = 0;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const std::string id(fproxkit::csv::trim(rows[r][id_col]));
    const auto it = label_by_id.find(id);
    if (it == label_by_id.end()) {
      ++unlabeled;
      continue;
    }
    labels.push_back(it->second);
    for (int c = 0; c < 4; ++c) {
      const auto v = fproxkit::csv::parse_double(fproxkit::csv::trim(rows[r][p_col[c]]));
      if (!v)
        fproxkit::fail("report_columns", "'" + o.curves + "' row " + std::to_string(r + 1) +
                                             ": unparseable p" + std::to_string(c + 1) + " cell");
      scores[c].push_back(*v);
    }
  }
  if (labels.empty())
    fproxkit::fail("curves_labels", "no scored row has a labeled product in '" + o.input + "'");

  std::string out;
  fproxkit::csv::write_row(out, {"class", "curve", "x", "y"});
  std::size_t curves_emitted = 0;
  for (int cls = 1; cls <= 4; ++cls) {
    std::vector<bool> positives(labels.size());
    std::size_t pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      positives[i] = labels[i] == cls;
      pos += positives[i];
    }
    if (pos > 0 && pos < labels.size()) {
      for (const auto& pt : fproxkit::roc_points(scores[cls - 1], positives))
        fproxkit::csv::write_row(out, {fproxkit::csv::format_int(cls), "roc",
                                       fproxkit::csv::format_double(pt[0]),
                                       fproxkit::csv::format_double(pt[1])});
      ++curves_emitted;
    }
    if (pos > 0) {
      for (const auto& pt : fproxkit::pr_points(scores[cls - 1], positives))
        fproxkit::csv::write_row(out, {fproxkit::csv::format_int(cls), "pr",
                                       fproxkit::csv::format_double(pt[0]),
                                       fproxkit::csv::format_double(pt[1])});
      ++curves_emitted;
    }
  }
  if (curves_emitted == 0)
    fproxkit::fail("curves_labels", "no class has enough labeled rows for any curve");
  m.write_output(o.out, out);
  m.params()["mode"] = "curves";
  m.params()["rows_unlabeled"] = unlabeled;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fproxkit: batch scoring and evaluation of food-product processing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", fproxkit::kVersion);

  Options o;

  auto add_threads = [&](CLI::App* c) {
    c->add_option("--threads", o.threads,
                  "worker threads (default: FPROXKIT_THREADS env var, then all cores)");
  };
  auto add_format = [&](CLI::App* c) {
    c->add_option("--format", o.format, "output format")
        ->check(CLI::IsMember({"csv", "json"}));
  };

  auto* ingest = app.add_subcommand("ingest", "Validate a product dump into the canonical table");
  ingest->add_option("--input", o.input, "source CSV/TSV with header")->required();
  ingest->add_option("--mapping", o.mapping, "column-mapping JSON (default: canonical columns)");
  ingest->add_option("--category-kinds", o.category_kinds, "category-to-kind JSON");
  ingest->add_flag("--strict", o.strict, "reject rows with soft consistency warnings");
  ingest->add_option("--out", o.out, "canonical products CSV")->required();

  auto* parse = app.add_subcommand("parse-ingredients", "Parse ingredient lists and count items");
  parse->add_option("--input", o.input, "canonical products CSV")->required();
  parse->add_option("--lexicon", o.lexicon, "additive lexicon CSV (code,name)");
  parse->add_option("--out", o.out, "per-product parse results")->required();
  add_format(parse);

  auto* nutri = app.add_subcommand("nutriscore", "Score products on the A-E front-of-pack scale");
  nutri->add_option("--input", o.input, "canonical products CSV")->required();
  nutri->add_option("--point-tables", o.point_tables, "component point ladders JSON")->required();
  nutri->add_option("--out", o.out, "per-product scores")->required();
  add_format(nutri);

  auto* siga = app.add_subcommand("siga", "Assign 7-class processing categories");
  siga->add_option("--input", o.input, "canonical products CSV")->required();
  siga->add_option("--out", o.out, "per-product classes")->required();
  add_format(siga);

  auto* profile = app.add_subcommand("profile", "Fit log-space nutrient distributions");
  profile->add_option("--input", o.input, "canonical products CSV")->required();
  profile->add_option("--bin-width", o.bin_width, "histogram bin width in log10 units");
  profile->add_option("--out", o.out, "stats JSON (histogram CSV lands at <out>.hist.csv)")
      ->required();

  auto* train = app.add_subcommand("train", "Train a forest on labeled products");
  train->add_option("--input", o.input, "canonical products CSV")->required();
  train->add_option("--spec", o.spec,
                    "feature source: nutrients11 | nutrients11_plus_additives | "
                    "ingredient_count_only | additive_count_only | embedding[:dim]");
  train->add_option("--lexicon", o.lexicon, "additive lexicon CSV");
  train->add_option("--embeddings", o.embeddings, "embedding table CSV");
  train->add_option("--seed", o.seed, "training seed");
  train->add_option("--n-trees", o.n_trees, "trees in the forest");
  train->add_option("--max-depth", o.max_depth, "maximum tree depth (0 = unbounded)");
  train->add_option("--min-samples-leaf", o.min_samples_leaf, "minimum rows per leaf");
  train->add_option("--features-per-split", o.features_per_split,
                    "features sampled per node (0 = ceil(sqrt(d)))");
  train->add_option("--out", o.out, "model JSON")->required();
  add_threads(train);

  auto* predict = app.add_subcommand("predict", "Predict class probabilities with a trained model");
  predict->add_option("--input", o.input, "canonical products CSV")->required();
  predict->add_option("--model", o.model, "model JSON from train")->required();
  predict->add_option("--lexicon", o.lexicon, "additive lexicon CSV");
  predict->add_option("--embeddings", o.embeddings, "embedding table CSV");
  predict->add_option("--out", o.out, "per-product probabilities")->required();
  add_format(predict);
  add_threads(predict);

  auto* fpro = app.add_subcommand("fpro", "Rank products by continuous processing score");
  fpro->add_option("--input", o.input, "canonical products CSV")->required();
  fpro->add_option("--model", o.model, "model JSON from train")->required();
  fpro->add_option("--lexicon", o.lexicon, "additive lexicon CSV");
  fpro->add_option("--embeddings", o.embeddings, "embedding table CSV");
  fpro->add_option("--out", o.out, "ranked scores with decision-space coordinates")->required();
  add_format(fpro);
  add_threads(fpro);

  auto* evaluate = app.add_subcommand("evaluate", "Cross-validated evaluation of a feature source");
  evaluate->add_option("--input", o.input, "canonical products CSV")->required();
  evaluate->add_option("--spec", o.spec, "feature source (see train)");
  evaluate->add_option("--lexicon", o.lexicon, "additive lexicon CSV");
  evaluate->add_option("--embeddings", o.embeddings, "embedding table CSV");
  evaluate->add_option("--seed", o.seed, "protocol seed");
  evaluate->add_option("--out", o.out, "evaluation report JSON (fold membership at <out>.folds.csv)")
      ->required();
  add_threads(evaluate);

  auto* report = app.add_subcommand("report", "Render comparison artifacts");
  report->add_option("--metrics", o.metrics, "evaluation report JSONs for the comparison table")
      ->expected(-1);
  report->add_option("--scores", o.scores, "ranked scores CSV (from fpro) for category summaries");
  report->add_option("--curves", o.curves, "probability CSV (from predict) for ROC/PR points");
  report->add_option("--input", o.input, "canonical products CSV (for --scores / --curves)");
  report->add_option("--min-n", o.min_n, "minimum rows per category (with --scores)");
  report->add_option("--out", o.out, "rendered artifact")->required();
  add_format(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 1;
  }

  try {
    Manifest m(argc, argv);
    if (ingest->parsed()) run_ingest(o, m);
    else if (parse->parsed()) run_parse_ingredients(o, m);
    else if (nutri->parsed()) run_nutriscore(o, m);
    else if (siga->parsed()) run_siga(o, m);
    else if (profile->parsed()) run_profile(o, m);
    else if (train->parsed()) run_train(o, m);
    else if (predict->parsed()) run_predict(o, m);
    else if (fpro->parsed()) run_fpro(o, m);
    else if (evaluate->parsed()) run_evaluate(o, m);
    else if (report->parsed()) {
      const int modes = (!o.metrics.empty()) + (!o.scores.empty()) + (!o.curves.empty());
      if (modes != 1)
        fproxkit::fail("report_mode",
                       "choose exactly one of --metrics, --scores, --curves");
      if (!o.metrics.empty()) run_report_metrics(o, m);
      else if (!o.scores.empty()) {
        if (o.input.empty()) fproxkit::fail("report_mode", "--scores needs --input for categories");
        run_report_categories(o, m);
      } else {
        if (o.input.empty()) fproxkit::fail("report_mode", "--curves needs --input for labels");
        run_report_curves(o, m);
      }
    }
    m.finish();
  } catch (const fproxkit::Error& e) {
    std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }
  return 0;
}
