#pragma once

// Ingredient-list parsing: label strings split on commas/semicolons at bracket
// depth 0; content inside matched () or [] becomes children of the preceding
// name. Unmatched brackets degrade to literal characters (with a warning flag)
// so parsing is total on arbitrary input. Additive detection is exact-match
// after normalization against a code/synonym lexicon.

#include <cctype>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "fproxkit/csv.hpp"
#include "fproxkit/error.hpp"

namespace fproxkit {

struct IngredientItem {
  std::string name;  // normalized: lowercase, collapsed whitespace, no trailing dots
  std::vector<IngredientItem> children;

  bool operator==(const IngredientItem&) const = default;
};

struct IngredientTree {
  std::vector<IngredientItem> items;
  bool unbalanced = false;  // an unmatched bracket was treated as literal text

  bool operator==(const IngredientTree&) const = default;
};

namespace detail {

// Lowercase, collapse whitespace runs, trim, drop trailing '.' characters.
inline std::string normalize_name(std::string_view raw) {
  std::string out;
  out.reserve(raw.size());
  bool pending_space = false;
  for (const char cc : raw) {
    const unsigned char u = static_cast<unsigned char>(cc);
    if (std::isspace(u)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out += ' ';
      pending_space = false;
    }
    out += static_cast<char>(std::tolower(u));
  }
  while (!out.empty() && (out.back() == '.' || out.back() == ' ')) out.pop_back();
  return out;
}

constexpr std::size_t kNoMatch = static_cast<std::size_t>(-1);

// match[i] = index of the partner bracket, or kNoMatch for non-brackets and
// unmatched brackets (kept literal).
inline std::vector<std::size_t> match_brackets(std::string_view text, bool& unbalanced) {
  std::vector<std::size_t> match(text.size(), kNoMatch);
  std::vector<std::size_t> stack;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c == '(' || c == '[') {
      stack.push_back(i);
    } else if (c == ')' || c == ']') {
      const char want = c == ')' ? '(' : '[';
      if (!stack.empty() && text[stack.back()] == want) {
        match[stack.back()] = i;
        match[i] = stack.back();
        stack.pop_back();
      } else {
        unbalanced = true;  // stray closer stays literal
      }
    }
  }
  if (!stack.empty()) unbalanced = true;  // unclosed openers stay literal
  return match;
}

inline std::vector<IngredientItem> parse_range(std::string_view text,
                                               const std::vector<std::size_t>& match,
                                               std::size_t lo, std::size_t hi) {
  std::vector<IngredientItem> out;
  std::size_t piece_start = lo;

  auto emit_piece = [&](std::size_t a, std::size_t b) {
    std::string name_buf;
    std::vector<IngredientItem> children;
    for (std::size_t i = a; i < b; ++i) {
      const char c = text[i];
      if ((c == '(' || c == '[') && match[i] != kNoMatch && match[i] < b) {
        auto sub = parse_range(text, match, i + 1, match[i]);
        children.insert(children.end(), std::make_move_iterator(sub.begin()),
                        std::make_move_iterator(sub.end()));
        i = match[i];
      } else {
        name_buf += c;
      }
    }
    std::string name = normalize_name(name_buf);
    if (name.empty()) {
      // "(a, b)" with no preceding name: promote the children one level up
      for (auto& ch : children) out.push_back(std::move(ch));
    } else {
      out.push_back(IngredientItem{std::move(name), std::move(children)});
    }
  };

  for (std::size_t i = lo; i < hi; ++i) {
    const char c = text[i];
    if ((c == '(' || c == '[') && match[i] != kNoMatch && match[i] < hi) {
      i = match[i];  // skip over the whole group
    } else if (c == ',' || c == ';') {
      emit_piece(piece_start, i);
      piece_start = i + 1;
    }
  }
  emit_piece(piece_start, hi);
  return out;
}

inline void render_item(std::string& out, const IngredientItem& item) {
  out += item.name;
  if (!item.children.empty()) {
    out += " (";
    for (std::size_t i = 0; i < item.children.size(); ++i) {
      if (i) out += ", ";
      render_item(out, item.children[i]);
    }
    out += ')';
  }
}

}  // namespace detail

// Total on arbitrary UTF-8 input; empty segments are dropped.
inline IngredientTree parse_ingredients(std::string_view text) {
  IngredientTree tree;
  const auto match = detail::match_brackets(text, tree.unbalanced);
  tree.items = detail::parse_range(text, match, 0, text.size());
  return tree;
}

// Canonical text form: "name (child, child), name, ...". Reparsing the output
// reproduces the same tree for any tree produced by parse_ingredients.
inline std::string to_string(const IngredientTree& tree) {
  std::string out;
  for (std::size_t i = 0; i < tree.items.size(); ++i) {
    if (i) out += ", ";
    detail::render_item(out, tree.items[i]);
  }
  return out;
}

// Number of label entries = top-level items; children are constituents of a
// compound ingredient, not separate entries.
inline std::size_t count_ingredients(const IngredientTree& tree) { return tree.items.size(); }

// ---------------------------------------------------------------------------
// additive lexicon

struct AdditiveLexicon {
  // normalized synonym (or normalized code) -> code as written in the file
  std::map<std::string, std::string> name_to_code;

  std::size_t size() const { return name_to_code.size(); }

  // CSV with header "code,name", one row per synonym. Codes themselves also
  // match (an item literally named "e466" counts). Synonyms must be
  // unambiguous: the same name under two codes is an error.
  static AdditiveLexicon from_csv_text(const std::string& text) {
    const auto rows = csv::parse(text);
    if (rows.empty() || rows[0].size() != 2 ||
        detail::normalize_name(rows[0][0]) != "code" || detail::normalize_name(rows[0][1]) != "name")
      fail("lexicon_header", "additive lexicon must start with header: code,name");
    AdditiveLexicon lex;
    auto add = [&](const std::string& key, const std::string& code, std::size_t row) {
      if (key.empty()) return;
      const auto [it, inserted] = lex.name_to_code.emplace(key, code);
      if (!inserted && it->second != code)
        fail("lexicon_duplicate", "row " + std::to_string(row) + ": name '" + key +
                                      "' bound to both " + it->second + " and " + code);
    };
    for (std::size_t r = 1; r < rows.size(); ++r) {
      if (rows[r].size() != 2)
        fail("lexicon_row", "row " + std::to_string(r + 1) + ": expected 2 cells");
      const std::string code(csv::trim(rows[r][0]));
      const std::string name = detail::normalize_name(rows[r][1]);
      if (code.empty() || name.empty())
        fail("lexicon_row", "row " + std::to_string(r + 1) + ": empty code or name");
      add(name, code, r + 1);
      add(detail::normalize_name(code), code, r + 1);
    }
    return lex;
  }
};

// Matching normalization: parse-level normalization plus stripping one
// trailing parenthetical annotation, e.g. "annatto (color)" -> "annatto".
inline std::string normalize_for_match(std::string_view raw) {
  std::string s = detail::normalize_name(raw);
  if (!s.empty() && s.back() == ')') {
    const auto open = s.rfind('(');
    if (open != std::string::npos && open > 0) {
      s = detail::normalize_name(std::string_view(s).substr(0, open));
    }
  }
  return s;
}

struct AdditiveMatch {
  std::string name;  // normalized matched item name
  std::string code;

  bool operator==(const AdditiveMatch&) const = default;
};

// Distinct item names (any depth) that exactly match a lexicon code or
// synonym after normalization; sorted by name.
inline std::vector<AdditiveMatch> match_additives(const IngredientTree& tree,
                                                  const AdditiveLexicon& lexicon) {
  std::map<std::string, std::string> found;
  auto visit = [&](const IngredientItem& item, auto&& self) -> void {
    const std::string key = normalize_for_match(item.name);
    const auto it = lexicon.name_to_code.find(key);
    if (it != lexicon.name_to_code.end()) found.emplace(key, it->second);
    for (const auto& ch : item.children) self(ch, self);
  };
  for (const auto& item : tree.items) visit(item, visit);
  std::vector<AdditiveMatch> out;
  out.reserve(found.size());
  for (const auto& [name, code] : found) out.push_back({name, code});
  return out;
}

// Count of distinct matched names; monotone under lexicon growth.
inline std::size_t count_additives(const IngredientTree& tree, const AdditiveLexicon& lexicon) {
  return match_additives(tree, lexicon).size();
}

}  // namespace fproxkit
