#pragma once

// Strict CSV ingestion for the small fixed-schema files the toolkit reads.
// Headers must match exactly; every cell must parse as a finite double.
// Error messages name the offending data row (1-based, header excluded).

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace zplkit {

class CsvError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail_csv {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline double parse_cell(std::string_view cell, std::size_t row, std::size_t col) {
  const std::string_view t = trim(cell);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc{} || ptr != t.data() + t.size())
    throw CsvError("row " + std::to_string(row) + ": column " + std::to_string(col + 1) +
                   " is not a number: '" + std::string(cell) + "'");
  if (!std::isfinite(v))
    throw CsvError("row " + std::to_string(row) + ": column " + std::to_string(col + 1) +
                   " is not finite");
  return v;
}

inline std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(line.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

// Splits text into lines, dropping a trailing \r and skipping blank lines
// only at the very end of the file.
inline std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= text.size(); ++i) {
    if (i == text.size() || text[i] == '\n') {
      std::string_view line = text.substr(start, i - start);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      start = i + 1;
    }
  }
  while (!lines.empty() && trim(lines.back()).empty()) lines.pop_back();
  return lines;
}

}  // namespace detail_csv

// Reads a CSV with the exact header "<col0>,<col1>".
inline std::vector<std::array<double, 2>> read_two_column_csv(std::string_view text,
                                                              std::string_view col0,
                                                              std::string_view col1) {
  using namespace detail_csv;
  const auto lines = split_lines(text);
  if (lines.empty()) throw CsvError("empty input, expected header '" + std::string(col0) + "," +
                                    std::string(col1) + "'");
  const auto header = split_line(lines[0]);
  if (header.size() != 2 || trim(header[0]) != col0 || trim(header[1]) != col1)
    throw CsvError("bad header '" + std::string(lines[0]) + "', expected '" + std::string(col0) +
                   "," + std::string(col1) + "'");
  std::vector<std::array<double, 2>> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t row = i;  // 1-based data row
    if (trim(lines[i]).empty())
      throw CsvError("row " + std::to_string(row) + ": blank line inside data");
    const auto cells = split_line(lines[i]);
    if (cells.size() != 2)
      throw CsvError("row " + std::to_string(row) + ": expected 2 columns, got " +
                     std::to_string(cells.size()));
    rows.push_back({parse_cell(cells[0], row, 0), parse_cell(cells[1], row, 1)});
  }
  return rows;
}

inline std::vector<double> read_single_column_csv(std::string_view text, std::string_view col0) {
  using namespace detail_csv;
  const auto lines = split_lines(text);
  if (lines.empty()) throw CsvError("empty input, expected header '" + std::string(col0) + "'");
  if (trim(lines[0]) != col0)
    throw CsvError("bad header '" + std::string(lines[0]) + "', expected '" + std::string(col0) +
                   "'");
  std::vector<double> rows;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (trim(lines[i]).empty())
      throw CsvError("row " + std::to_string(i) + ": blank line inside data");
    const auto cells = split_line(lines[i]);
    if (cells.size() != 1)
      throw CsvError("row " + std::to_string(i) + ": expected 1 column, got " +
                     std::to_string(cells.size()));
    rows.push_back(parse_cell(cells[0], i, 0));
  }
  return rows;
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CsvError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace zplkit
