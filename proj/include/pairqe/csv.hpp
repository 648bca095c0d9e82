#pragma once

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pairqe/counting.hpp"
#include "pairqe/errors.hpp"
#include "pairqe/jsa.hpp"

namespace pairqe {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;  // NaN marks an empty cell

  int column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  }
};

namespace detail {

inline std::string trimmed(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(trimmed(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  cells.push_back(trimmed(cur));
  return cells;
}

inline double parse_cell(const std::string& cell, const std::string& path, std::size_t line_no,
                         std::size_t col) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(cell.c_str(), &end);
  if (end != cell.c_str() + cell.size() || errno == ERANGE) {
    std::ostringstream msg;
    msg << path << ":" << line_no << ": column " << (col + 1) << ": cannot parse '" << cell
        << "' as a number";
    throw input_error(msg.str());
  }
  return v;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw input_error(path + ": cannot open file");
  CsvTable table;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (detail::trimmed(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    if (table.header.empty()) {
      table.header = cells;
      continue;
    }
    if (cells.size() != table.header.size()) {
      std::ostringstream msg;
      msg << path << ":" << line_no << ": expected " << table.header.size() << " columns, got "
          << cells.size();
      throw input_error(msg.str());
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
      row[c] = detail::parse_cell(cells[c], path, line_no, c);
    table.rows.push_back(std::move(row));
  }
  if (table.header.empty()) throw input_error(path + ": missing header line");
  return table;
}

inline void require_columns(const CsvTable& table, std::initializer_list<std::string_view> names,
                            const std::string& path) {
  for (const auto name : names) {
    if (table.column(name) < 0) {
      std::ostringstream msg;
      msg << path << ":1: missing required column '" << name
          << "' (unit-suffixed headers are mandatory)";
      throw input_error(msg.str());
    }
  }
}

// Atomic write: content lands in a temporary sibling and is renamed into
// place, so a failure never leaves a partial output file.
inline void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw input_error(path + ": cannot open for writing");
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw input_error(path + ": write failed");
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw input_error(path + ": rename failed: " + ec.message());
  }
}

inline constexpr std::string_view kCountsHeader =
    "p_ave_mw,gates,singles_signal,singles_idler,coincidences_raw,accidentals_measured";
inline constexpr std::string_view kScanHeader = "lambda_s0_prime_nm,cc_normalized,eta_ts";
inline constexpr std::string_view kCurveHeader = "x,value";

inline std::vector<CountRecord> read_counts_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  require_columns(table,
                  {"p_ave_mw", "gates", "singles_signal", "singles_idler", "coincidences_raw",
                   "accidentals_measured"},
                  path);
  const int cp = table.column("p_ave_mw");
  const int cg = table.column("gates");
  const int cs = table.column("singles_signal");
  const int ci = table.column("singles_idler");
  const int cc = table.column("coincidences_raw");
  const int ca = table.column("accidentals_measured");
  std::vector<CountRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    CountRecord rec;
    rec.p_ave_mw = row[cp];
    auto as_count = [&](double v, const char* what) -> std::uint64_t {
      if (std::isnan(v) || v < 0.0 || v != std::floor(v)) {
        std::ostringstream msg;
        msg << path << ":" << (r + 2) << ": " << what << " must be a nonnegative integer";
        throw input_error(msg.str());
      }
      return static_cast<std::uint64_t>(v);
    };
    rec.gates = as_count(row[cg], "gates");
    rec.singles_signal = as_count(row[cs], "singles_signal");
    rec.singles_idler = as_count(row[ci], "singles_idler");
    rec.coincidences_raw = as_count(row[cc], "coincidences_raw");
    if (!std::isnan(row[ca])) rec.accidentals_measured = as_count(row[ca], "accidentals_measured");
    try {
      rec.validate();
    } catch (const std::exception& e) {
      std::ostringstream msg;
      msg << path << ":" << (r + 2) << ": " << e.what();
      throw input_error(msg.str());
    }
    records.push_back(rec);
  }
  return records;
}

inline std::string counts_to_csv(std::span<const CountRecord> records) {
  std::ostringstream out;
  out << kCountsHeader << "\n";
  for (const auto& r : records) {
    out << r.p_ave_mw << "," << r.gates << "," << r.singles_signal << "," << r.singles_idler << ","
        << r.coincidences_raw << ",";
    if (r.accidentals_measured) out << *r.accidentals_measured;
    out << "\n";
  }
  return out.str();
}

inline std::vector<ScanRecord> read_scan_csv(const std::string& path) {
  const CsvTable table = read_csv(path);
  require_columns(table, {"lambda_s0_prime_nm", "cc_normalized", "eta_ts"}, path);
  const int cl = table.column("lambda_s0_prime_nm");
  const int cc = table.column("cc_normalized");
  const int ce = table.column("eta_ts");
  std::vector<ScanRecord> records;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (std::isnan(row[cl]) || std::isnan(row[cc]) || std::isnan(row[ce])) {
      std::ostringstream msg;
      msg << path << ":" << (r + 2) << ": empty cell in scan record";
      throw input_error(msg.str());
    }
    if (row[cl] <= 0.0 || row[ce] <= 0.0 || row[ce] > 1.0) {
      std::ostringstream msg;
      msg << path << ":" << (r + 2) << ": wavelength must be positive and eta_ts in (0, 1]";
      throw input_error(msg.str());
    }
    records.push_back({row[cl], row[cc], row[ce]});
  }
  return records;
}

}  // namespace pairqe
