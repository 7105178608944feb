#ifndef MVHEDGE_REPORT_HPP
#define MVHEDGE_REPORT_HPP

// Command reports and their three renderings.
//
// Structured reports are JSON objects with fixed key order:
//
//   {
//     "command":  "<subcommand>",
//     "columns":  ["time", "id", ...],
//     "rows":     [{"time": 0, "id": "root", ...}, ...],   // canonical (time, id) order
//     "summary":  {"<name>": value, ...},
//     "checks":   [{"name": ..., "value": ..., "tolerance": ..., "passed": ...}, ...],
//     "warnings": ["...", ...],
//     "passed":   true
//   }
//
// Non-finite numbers and undefined entries are written as null.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace mvhedge::io {

using Cell = std::variant<std::monostate, double, long long, std::string, bool>;

struct Check {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool passed = false;
  std::string detail;
};

struct Report {
  std::string command;
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;
  std::vector<std::pair<std::string, Cell>> summary;
  std::vector<Check> checks;
  std::vector<std::string> warnings;

  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }

  void add_check(std::string name, double value, double tolerance, bool passed, std::string detail = {}) {
    checks.push_back({std::move(name), value, tolerance, passed, std::move(detail)});
  }
};

enum class Format { table, csv, structured };

namespace detail {

inline std::string number_text(double v, int digits) {
  if (std::isnan(v)) return "";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

inline std::string cell_text(const Cell& cell, int digits) {
  struct Visitor {
    int digits;
    std::string operator()(std::monostate) const { return ""; }
    std::string operator()(double v) const { return number_text(v, digits); }
    std::string operator()(long long v) const { return std::to_string(v); }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(bool b) const { return b ? "true" : "false"; }
  };
  return std::visit(Visitor{digits}, cell);
}

inline nlohmann::ordered_json cell_json(const Cell& cell) {
  struct Visitor {
    nlohmann::ordered_json operator()(std::monostate) const { return nullptr; }
    nlohmann::ordered_json operator()(double v) const {
      if (!std::isfinite(v)) return nullptr;
      return v;
    }
    nlohmann::ordered_json operator()(long long v) const { return v; }
    nlohmann::ordered_json operator()(const std::string& s) const { return s; }
    nlohmann::ordered_json operator()(bool b) const { return b; }
  };
  return std::visit(Visitor{}, cell);
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string render_table(const Report& r) {
  std::vector<std::vector<std::string>> cells;
  cells.push_back(r.columns);
  for (const auto& row : r.rows) {
    std::vector<std::string> line;
    for (const auto& c : row) line.push_back(detail::cell_text(c, 10));
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(r.columns.size(), 0);
  for (const auto& line : cells) {
    for (std::size_t i = 0; i < line.size() && i < width.size(); ++i) width[i] = std::max(width[i], line[i].size());
  }

  std::string out = "== " + r.command + " ==\n";
  for (std::size_t k = 0; k < cells.size(); ++k) {
    std::string line;
    for (std::size_t i = 0; i < cells[k].size() && i < width.size(); ++i) {
      if (i) line += "  ";
      line += std::string(width[i] - cells[k][i].size(), ' ') + cells[k][i];
    }
    out += line + "\n";
    if (k == 0) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
    }
  }
  if (!r.summary.empty()) {
    out += "\nsummary\n";
    for (const auto& [name, value] : r.summary) out += "  " + name + ": " + detail::cell_text(value, 12) + "\n";
  }
  if (!r.checks.empty()) {
    out += "\nchecks\n";
    for (const auto& c : r.checks) {
      out += std::string(c.passed ? "  PASS " : "!! FAIL ") + c.name + ": " + detail::number_text(c.value, 6) +
             " (tolerance " + detail::number_text(c.tolerance, 3) + ")";
      if (!c.detail.empty()) out += " " + c.detail;
      out += "\n";
    }
  }
  for (const auto& w : r.warnings) out += "warning: " + w + "\n";
  out += std::string("\nresult: ") + (r.passed() ? "PASS" : "FAIL") + "\n";
  return out;
}

/// Columns and rows only; checks and warnings go elsewhere.
inline std::string render_csv(const Report& r) {
  std::string out;
  for (std::size_t i = 0; i < r.columns.size(); ++i) out += (i ? "," : "") + detail::csv_escape(r.columns[i]);
  out += "\n";
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + detail::csv_escape(detail::cell_text(row[i], 17));
    out += "\n";
  }
  return out;
}

inline std::string render_structured(const Report& r) {
  nlohmann::ordered_json doc;
  doc["command"] = r.command;
  doc["columns"] = r.columns;
  doc["rows"] = nlohmann::ordered_json::array();
  for (const auto& row : r.rows) {
    nlohmann::ordered_json obj = nlohmann::ordered_json::object();
    for (std::size_t i = 0; i < row.size() && i < r.columns.size(); ++i) obj[r.columns[i]] = detail::cell_json(row[i]);
    doc["rows"].push_back(std::move(obj));
  }
  doc["summary"] = nlohmann::ordered_json::object();
  for (const auto& [name, value] : r.summary) doc["summary"][name] = detail::cell_json(value);
  doc["checks"] = nlohmann::ordered_json::array();
  for (const auto& c : r.checks) {
    nlohmann::ordered_json obj;
    obj["name"] = c.name;
    obj["value"] = detail::cell_json(c.value);
    obj["tolerance"] = c.tolerance;
    obj["passed"] = c.passed;
    if (!c.detail.empty()) obj["detail"] = c.detail;
    doc["checks"].push_back(std::move(obj));
  }
  doc["warnings"] = r.warnings;
  doc["passed"] = r.passed();
  return doc.dump(2) + "\n";
}

inline std::string render(const Report& r, Format f) {
  switch (f) {
    case Format::table:
      return render_table(r);
    case Format::csv:
      return render_csv(r);
    case Format::structured:
      return render_structured(r);
  }
  return {};
}

}  // namespace mvhedge::io

#endif  // MVHEDGE_REPORT_HPP
