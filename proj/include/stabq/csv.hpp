#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "stabq/experiments.hpp"
#include "stabq/format.hpp"

namespace stabq {

// CSV output: UTF-8, header row, LF line endings, shortest round-trip float
// formatting. Rows are written in table order (drivers construct them sorted
// by (n, replicate)).
inline void emit_csv(const Table& table, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("emit_csv: cannot open '" + path.string() + "' for writing");
  std::string line;
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) line += ',';
    line += table.columns[i];
  }
  line += '\n';
  out << line;
  for (const auto& row : table.rows) {
    if (row.size() != table.columns.size())
      throw std::runtime_error("emit_csv: row width mismatch in table '" + table.name + "'");
    line.clear();
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) line += ',';
      line += format_double(row[i]);
    }
    line += '\n';
    out << line;
  }
  if (!out) throw std::runtime_error("emit_csv: write failed for '" + path.string() + "'");
}

inline void emit_summary_csv(const Report& report, const std::filesystem::path& path) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("emit_summary_csv: cannot open '" + path.string() + "' for writing");
  out << "key,value\n";
  for (const auto& [k, v] : report.summary) out << k << ',' << v << '\n';
  out << "result," << (report.pass ? "PASS" : "FAIL") << '\n';
  if (!out) throw std::runtime_error("emit_summary_csv: write failed for '" + path.string() + "'");
}

}  // namespace stabq
