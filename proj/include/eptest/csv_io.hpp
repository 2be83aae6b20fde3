#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "eptest/errors.hpp"
#include "eptest/regression_data.hpp"

namespace eptest {

/// Raw comma-separated cells. Row numbers in errors are 1-based file lines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<long> lines;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

/// Splits one line; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(const std::string& line, long lineNo) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  bool wasQuoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
    } else if (ch == '"') {
      quoted = true;
      wasQuoted = true;
    } else if (ch == ',') {
      cells.push_back(wasQuoted ? cell : trim(cell));
      cell.clear();
      wasQuoted = false;
    } else {
      cell += ch;
    }
  }
  if (quoted) throw ParseError("unterminated quote on row " + std::to_string(lineNo), lineNo, -1);
  cells.push_back(wasQuoted ? cell : trim(cell));
  return cells;
}

inline std::optional<double> parse_number(const std::string& cell) {
  if (cell.empty()) return std::nullopt;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (*first == '+') ++first;
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

inline double parse_cell(const std::string& cell, long row, long column) {
  const auto value = parse_number(cell);
  const std::string where = " at row " + std::to_string(row) + ", column " + std::to_string(column);
  if (!value) throw ParseError("non-numeric cell '" + cell + "'" + where, row, column);
  if (!std::isfinite(*value)) throw ParseError("non-finite cell '" + cell + "'" + where, row, column);
  return *value;
}

inline bool looks_like_header(const std::vector<std::string>& cells) {
  return std::any_of(cells.begin(), cells.end(), [](const std::string& c) {
    const auto v = parse_number(c);
    return !v.has_value() && !c.empty();
  }) && std::none_of(cells.begin(), cells.end(), [](const std::string& c) {
    const auto v = parse_number(c);
    return v.has_value() && std::isfinite(*v);
  });
}

}  // namespace detail

/// Reads a rectangular CSV. With `header` unset the first row is treated as a
/// header when none of its cells is a finite number.
inline CsvTable read_csv(std::istream& in, std::optional<bool> header = std::nullopt) {
  CsvTable table;
  std::string line;
  long lineNo = 0;
  bool first = true;
  if (!in.good()) throw ParseError("cannot read CSV input");
  while (std::getline(in, line)) {
    ++lineNo;
    if (first && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line, lineNo);
    if (first) {
      first = false;
      const bool isHeader = header.value_or(detail::looks_like_header(cells));
      if (isHeader) {
        table.header = std::move(cells);
        continue;
      }
    }
    const std::size_t width = table.header.empty() ? (table.rows.empty() ? cells.size() : table.rows.front().size())
                                                   : table.header.size();
    if (cells.size() != width) {
      throw ParseError("ragged row " + std::to_string(lineNo) + ": expected " + std::to_string(width) +
                           " fields, found " + std::to_string(cells.size()),
                       lineNo, static_cast<long>(std::min(cells.size(), width)) + 1);
    }
    table.rows.push_back(std::move(cells));
    table.lines.push_back(lineNo);
  }
  return table;
}

inline CsvTable read_csv_file(const std::string& path, std::optional<bool> header = std::nullopt) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return read_csv(in, header);
}

struct LoadedData {
  RegressionData data;
  std::vector<std::string> columnNames;
  std::string responseName = "y";
  std::optional<std::vector<std::string>> groups;
};

struct LoadOptions {
  bool standardize = false;
  /// Column holding group labels; its per-group means are removed from y and X.
  std::optional<std::string> groupColumn;
};

namespace detail {

inline std::size_t find_column(const CsvTable& table, const std::string& name, const char* role) {
  const auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end()) {
    throw ParseError(std::string(role) + " column '" + name + "' not found in header", 1, -1);
  }
  return static_cast<std::size_t>(it - table.header.begin());
}

inline LoadedData finish(LoadedData loaded, const LoadOptions& opt) {
  if (loaded.data.n() < 2) throw ParseError("need at least 2 data rows, found " + std::to_string(loaded.data.n()));
  if (loaded.data.p() < 1) throw ParseError("no covariate columns");
  validate(loaded.data);
  if (loaded.groups) loaded.data = remove_group_means(loaded.data, *loaded.groups);
  if (opt.standardize) loaded.data = standardize(loaded.data);
  return loaded;
}

}  // namespace detail

/// Combined file: header required, one response column, every other column a covariate.
inline LoadedData load_csv(std::istream& in, const std::string& response, const LoadOptions& opt = {}) {
  const CsvTable table = read_csv(in, true);
  if (table.header.empty()) throw ParseError("combined CSV requires a header row");
  const std::size_t yCol = detail::find_column(table, response, "response");
  std::optional<std::size_t> gCol;
  if (opt.groupColumn) gCol = detail::find_column(table, *opt.groupColumn, "group");

  LoadedData loaded;
  loaded.responseName = response;
  std::vector<std::size_t> xCols;
  for (std::size_t c = 0; c < table.header.size(); ++c) {
    if (c == yCol || (gCol && c == *gCol)) continue;
    xCols.push_back(c);
    loaded.columnNames.push_back(table.header[c]);
  }
  const auto n = static_cast<Eigen::Index>(table.rows.size());
  Vector y(n);
  Matrix X(n, static_cast<Eigen::Index>(xCols.size()));
  if (gCol) loaded.groups.emplace();
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    const long line = table.lines[static_cast<std::size_t>(i)];
    y(i) = detail::parse_cell(row[yCol], line, static_cast<long>(yCol) + 1);
    for (std::size_t k = 0; k < xCols.size(); ++k) {
      X(i, static_cast<Eigen::Index>(k)) = detail::parse_cell(row[xCols[k]], line, static_cast<long>(xCols[k]) + 1);
    }
    if (gCol) loaded.groups->push_back(row[*gCol]);
  }
  loaded.data.y = std::move(y);
  loaded.data.X = std::move(X);
  loaded.data.columnMeans = Vector::Zero(loaded.data.X.cols());
  loaded.data.columnScales = Vector::Ones(loaded.data.X.cols());
  return detail::finish(std::move(loaded), opt);
}

inline LoadedData load_csv(const std::string& path, const std::string& response, const LoadOptions& opt = {}) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  return load_csv(in, response, opt);
}

/// Separate files: y has a single column, X has p columns; headers are optional.
inline LoadedData load_csv(std::istream& yIn, std::istream& xIn, const LoadOptions& opt = {}) {
  if (opt.groupColumn) throw ParseError("group column requires the combined file form");
  const CsvTable yt = read_csv(yIn);
  const CsvTable xt = read_csv(xIn);
  const std::size_t yWidth = yt.rows.empty() ? yt.header.size() : yt.rows.front().size();
  if (yWidth != 1) throw ParseError("response file must have exactly one column", 1, 2);
  if (yt.rows.size() != xt.rows.size()) {
    throw ParseError("response has " + std::to_string(yt.rows.size()) + " rows but design has " +
                     std::to_string(xt.rows.size()));
  }
  LoadedData loaded;
  if (!yt.header.empty()) loaded.responseName = yt.header.front();
  const auto n = static_cast<Eigen::Index>(xt.rows.size());
  const auto p = static_cast<Eigen::Index>(xt.rows.empty() ? xt.header.size() : xt.rows.front().size());
  for (Eigen::Index j = 0; j < p; ++j) {
    loaded.columnNames.push_back(xt.header.empty() ? "x" + std::to_string(j + 1)
                                                   : xt.header[static_cast<std::size_t>(j)]);
  }
  Vector y(n);
  Matrix X(n, p);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto r = static_cast<std::size_t>(i);
    y(i) = detail::parse_cell(yt.rows[r][0], yt.lines[r], 1);
    for (Eigen::Index j = 0; j < p; ++j) {
      X(i, j) = detail::parse_cell(xt.rows[r][static_cast<std::size_t>(j)], xt.lines[r], static_cast<long>(j) + 1);
    }
  }
  loaded.data.y = std::move(y);
  loaded.data.X = std::move(X);
  loaded.data.columnMeans = Vector::Zero(p);
  loaded.data.columnScales = Vector::Ones(p);
  return detail::finish(std::move(loaded), opt);
}

inline LoadedData load_csv_pair(const std::string& yPath, const std::string& xPath, const LoadOptions& opt = {}) {
  std::ifstream yIn(yPath);
  if (!yIn) throw ParseError("cannot open '" + yPath + "'");
  std::ifstream xIn(xPath);
  if (!xIn) throw ParseError("cannot open '" + xPath + "'");
  return load_csv(yIn, xIn, opt);
}

}  // namespace eptest
