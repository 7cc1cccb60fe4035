#pragma once

// Field CSV interchange.
//
// Header "t1,...,tp,u1,...,un", then one row per node in lexicographic order (last axis
// fastest). Numbers use 17 significant digits so a write/read cycle is bit-exact. The closed
// form repeats the wrap faces, giving N+1 rows per axis.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "pgrad/error.hpp"
#include "pgrad/grid.hpp"

namespace pgrad::io {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_header(std::size_t p, std::size_t n) {
  std::string h;
  for (std::size_t a = 0; a < p; ++a) h += (a ? ",t" : "t") + std::to_string(a + 1);
  for (std::size_t i = 0; i < n; ++i) h += ",u" + std::to_string(i + 1);
  return h;
}

inline void write_field_csv(std::ostream& os, const Field& u) {
  const auto& g = u.spec();
  os << csv_header(g.p(), g.n()) << '\n';
  std::vector<double> t(g.p());
  for (std::size_t k = 0; k < g.node_count(); ++k) {
    g.time_of(k, t);
    std::string row;
    for (std::size_t a = 0; a < g.p(); ++a) row += (a ? "," : "") + format_double(t[a]);
    for (double v : u.node(k)) row += "," + format_double(v);
    os << row << '\n';
  }
}

inline void write_closed_csv(std::ostream& os, const ClosedField& c) {
  const auto& g = c.spec;
  os << csv_header(g.p(), g.n()) << '\n';
  for (std::size_t q = 0; q < c.node_count(); ++q) {
    std::string row;
    for (std::size_t a = 0; a < g.p(); ++a) {
      const std::size_t k = (q / c.stride(a)) % c.nodes[a];
      row += (a ? "," : "") + format_double(static_cast<double>(k) * g.spacing(a));
    }
    for (std::size_t i = 0; i < g.n(); ++i) row += "," + format_double(c(q, i));
    os << row << '\n';
  }
}

/// Raw rows of a field CSV after header validation.
struct CsvTable {
  std::size_t p = 0;
  std::size_t n = 0;
  std::vector<std::vector<double>> rows;
};

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline CsvTable read_csv_table(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw FormatError("field CSV is empty");
  const auto header = split_commas(trim(line));
  CsvTable table;
  std::size_t col = 0;
  while (col < header.size() && trim(header[col]) == "t" + std::to_string(col + 1)) ++col;
  table.p = col;
  while (col < header.size() && trim(header[col]) == "u" + std::to_string(col - table.p + 1)) ++col;
  table.n = col - table.p;
  if (col != header.size() || table.p == 0 || table.n == 0)
    throw FormatError("field CSV header must be t1,...,tp,u1,...,un");

  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto cells = split_commas(line);
    if (cells.size() != header.size())
      throw FormatError("line " + std::to_string(line_no) + ": expected " + std::to_string(header.size()) +
                        " columns, got " + std::to_string(cells.size()));
    std::vector<double> row;
    row.reserve(cells.size());
    for (const auto& c : cells) {
      const std::string cell = trim(c);
      char* end = nullptr;
      const double v = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size() || !std::isfinite(v))
        throw FormatError("line " + std::to_string(line_no) + ": bad number '" + cell + "'");
      row.push_back(v);
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

/// A CSV holds either the periodic node set or the closed one.
using ImportedField = std::variant<Field, ClosedField>;

/// Reads a field CSV for grid `g`, detecting open or closed form from the row count and
/// checking that the time columns sit on the grid nodes.
inline ImportedField read_field_csv(std::istream& is, const GridSpec& g) {
  const CsvTable table = read_csv_table(is);
  if (table.p != g.p() || table.n != g.n())
    throw FormatError("field CSV has p=" + std::to_string(table.p) + ", n=" + std::to_string(table.n) +
                      " but the grid has p=" + std::to_string(g.p()) + ", n=" + std::to_string(g.n()));
  std::size_t closed_count = 1;
  for (auto N : g.nodes()) closed_count *= N + 1;
  const bool closed = table.rows.size() == closed_count;
  if (!closed && table.rows.size() != g.node_count())
    throw FormatError("field CSV has " + std::to_string(table.rows.size()) + " rows; expected " +
                      std::to_string(g.node_count()) + " (periodic) or " + std::to_string(closed_count) +
                      " (closed)");

  ClosedField c{g, {}, {}};
  std::vector<std::size_t> shape = g.nodes();
  if (closed) {
    for (auto& N : shape) ++N;
    c.nodes = shape;
  }
  std::vector<double> values;
  values.reserve(table.rows.size() * g.n());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    std::size_t rem = r;
    for (std::size_t a = g.p(); a-- > 0;) {
      const std::size_t k = rem % shape[a];
      rem /= shape[a];
      const double expected = static_cast<double>(k) * g.spacing(a);
      if (std::abs(table.rows[r][a] - expected) > 1e-9 * g.extents()[a])
        throw FormatError("row " + std::to_string(r + 1) + ": t" + std::to_string(a + 1) + " = " +
                          format_double(table.rows[r][a]) + " is not the grid node " + format_double(expected));
    }
    for (std::size_t i = 0; i < g.n(); ++i) values.push_back(table.rows[r][g.p() + i]);
  }
  if (closed) {
    c.values = std::move(values);
    return c;
  }
  return Field(g, std::move(values));
}

inline ImportedField read_field_csv(const std::string& path, const GridSpec& g) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open field CSV '" + path + "'");
  return read_field_csv(in, g);
}

/// Periodic field from either form (closed data loses its duplicated faces).
inline Field as_field(const ImportedField& f) {
  if (const auto* open = std::get_if<Field>(&f)) return *open;
  return from_closed(std::get<ClosedField>(f));
}

inline void write_field_csv(const std::string& path, const Field& u, bool closed = false) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  if (closed) write_closed_csv(out, to_closed(u));
  else write_field_csv(out, u);
}

}  // namespace pgrad::io
