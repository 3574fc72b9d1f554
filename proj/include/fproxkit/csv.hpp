#pragma once

// RFC-4180 style CSV: quoted fields may contain the delimiter, doubled quotes,
// and embedded line breaks. The writer emits bytes that parse back to the same
// cells; numbers use shortest round-trip formatting so serialization is
// lossless and byte-deterministic.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fproxkit/error.hpp"

namespace fproxkit::csv {

// Parses delimiter-separated text into records of cells. Handles a UTF-8 BOM,
// CRLF/LF endings and multi-line quoted fields. Blank lines are skipped. A
// quote that opens mid-field is kept as a literal character (lenient mode for
// real-world dumps); an unterminated quoted field is an error.
inline std::vector<std::vector<std::string>> parse(std::string_view text, char delim = ',') {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_quoted = false;
  bool row_had_quote = false;

  auto end_field = [&] {
    row_had_quote |= field_quoted;
    row.push_back(std::move(field));
    field.clear();
    field_quoted = false;
  };
  auto end_row = [&] {
    end_field();
    const bool blank_line = row.size() == 1 && row[0].empty() && !row_had_quote;
    if (!blank_line) records.push_back(std::move(row));
    row.clear();
    row_had_quote = false;
  };

  std::size_t i = 0;
  if (text.size() >= 3 && text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty() && !field_quoted) {
      in_quotes = true;
      field_quoted = true;
    } else if (c == delim) {
      end_field();
    } else if (c == '\n') {
      end_row();
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_row();
    } else {
      field += c;
    }
  }
  if (in_quotes) fail("csv_quote", "unterminated quoted field at end of input");
  if (!field.empty() || !row.empty() || field_quoted) end_row();
  return records;
}

inline void write_field(std::string& out, std::string_view f, char delim) {
  const bool quote = f.find_first_of("\"\r\n") != std::string_view::npos ||
                     f.find(delim) != std::string_view::npos;
  if (!quote) {
    out.append(f);
    return;
  }
  out += '"';
  for (const char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

inline void write_row(std::string& out, const std::vector<std::string>& fields, char delim = ',') {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += delim;
    write_field(out, fields[i], delim);
  }
  out += '\n';
}

inline std::string write(const std::vector<std::vector<std::string>>& records, char delim = ',') {
  std::string out;
  for (const auto& r : records) write_row(out, r, delim);
  return out;
}

// Shortest decimal form that parses back to exactly the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::string format_int(long long v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Strict full-string parse; no surrounding whitespace tolerated here (callers
// trim first). Returns nullopt on any trailing garbage.
inline std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long long> parse_int(std::string_view s) {
  if (s.empty()) return std::nullopt;
  long long v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string_view trim(std::string_view s) {
  const char* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

}  // namespace fproxkit::csv
