#pragma once

// Descriptor cache: CSV with header `id,label,group,f0,...,f{D-1}` and one
// row per image. Text fields are quoted RFC 4180 style when they contain a
// comma, quote or newline. Reals use the shortest representation that
// round-trips to the same double (always >= 12 significant digits of
// information, and bit-exact on reload).

#include <charconv>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "pptex/error.hpp"

namespace pptex {

struct CacheRow {
  std::string id;
  std::string label;
  std::string group;
  std::vector<double> values;
};

namespace detail {

inline void append_csv_field(std::string& out, std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) {
    out += s;
    return;
  }
  out += '"';
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
}

inline void append_double(std::string& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) throw IoError("cache: failed to format value");
  out.append(buf, end);
}

// Splits one CSV record. Quoted fields may not span lines in this format.
inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (quoted) throw InputError("cache: unterminated quoted field");
  fields.push_back(std::move(cur));
  return fields;
}

inline double parse_double(const std::string& s, std::size_t line_no) {
  double v = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc{} || ptr != last)
    throw InputError("cache line " + std::to_string(line_no) + ": bad number '" + s + "'");
  return v;
}

}  // namespace detail

inline std::string format_cache_row(const CacheRow& row) {
  std::string line;
  detail::append_csv_field(line, row.id);
  line += ',';
  detail::append_csv_field(line, row.label);
  line += ',';
  detail::append_csv_field(line, row.group);
  for (double v : row.values) {
    line += ',';
    detail::append_double(line, v);
  }
  return line;
}

/// Writes to `path`.partial, then renames over `path`; a failed write never
/// leaves a truncated cache under the final name.
inline void write_cache(const std::filesystem::path& path, const std::vector<CacheRow>& rows) {
  const std::size_t dim = rows.empty() ? 0 : rows.front().values.size();
  for (const auto& r : rows)
    if (r.values.size() != dim) throw InputError("write_cache: rows have differing lengths");

  std::filesystem::path tmp = path;
  tmp += ".partial";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("write_cache: cannot open " + tmp.string());
    std::string header = "id,label,group";
    for (std::size_t i = 0; i < dim; ++i) header += ",f" + std::to_string(i);
    out << header << '\n';
    for (const auto& r : rows) out << format_cache_row(r) << '\n';
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw IoError("write_cache: write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("write_cache: cannot rename into " + path.string());
  }
}

inline std::vector<CacheRow> read_cache(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("read_cache: cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw InputError("read_cache: " + path.string() + " is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "label" || header[2] != "group")
    throw InputError("read_cache: " + path.string() + " lacks the id,label,group header");
  const std::size_t dim = header.size() - 3;
  for (std::size_t i = 0; i < dim; ++i)
    if (header[3 + i] != "f" + std::to_string(i))
      throw InputError("read_cache: unexpected column name '" + header[3 + i] + "'");

  std::vector<CacheRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != header.size())
      throw InputError("read_cache line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    CacheRow row{std::move(fields[0]), std::move(fields[1]), std::move(fields[2]), {}};
    row.values.reserve(dim);
    for (std::size_t i = 0; i < dim; ++i) row.values.push_back(detail::parse_double(fields[3 + i], line_no));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace pptex
