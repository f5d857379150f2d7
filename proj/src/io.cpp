/*
 * Part of nsgp, a C++ library for Bayesian inference on nonstationary
 * spatial Gaussian processes.
 *
 * Licensed under the Apache License, Version 2.0. See LICENSE in the
 * project root for license information.
 */
#include "nsgp/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "nsgp/errors.hpp"

namespace nsgp {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    // trim surrounding whitespace
    const auto first = cell.find_first_not_of(" \t\r");
    const auto last = cell.find_last_not_of(" \t\r");
    out.push_back(first == std::string::npos ? "" : cell.substr(first, last - first + 1));
  }
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

}  // namespace

int DataTable::column(const std::string& name) const {
  for (std::size_t c = 0; c < columns.size(); ++c) {
    if (columns[c] == name) return static_cast<int>(c);
  }
  throw data_error("column '" + name + "' not found in the data table");
}

bool DataTable::has_column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c == name) return true;
  }
  return false;
}

Eigen::VectorXd DataTable::col(const std::string& name) const {
  return values.col(column(name));
}

DataTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw data_error("cannot open '" + path + "'");

  DataTable table;
  std::string line;
  std::vector<std::vector<double>> rows;
  bool header_read = false;
  long line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      table.comments.push_back(line);
      continue;
    }
    const auto cells = split_line(line);
    if (!header_read) {
      table.columns = cells;
      header_read = true;
      continue;
    }
    if (cells.size() != table.columns.size()) {
      throw data_error("'" + path + "' line " + std::to_string(line_number) + ": expected " +
                       std::to_string(table.columns.size()) + " cells, got " +
                       std::to_string(cells.size()));
    }
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      try {
        std::size_t used = 0;
        row[c] = std::stod(cells[c], &used);
        if (used != cells[c].size()) throw std::invalid_argument(cells[c]);
      } catch (const std::exception&) {
        throw data_error("'" + path + "' line " + std::to_string(line_number) +
                         ": cell '" + cells[c] + "' in column '" + table.columns[c] +
                         "' is not numeric");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!header_read) throw data_error("'" + path + "' is empty");

  table.values.resize(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      table.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return table;
}

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const Eigen::MatrixXd& values, const std::vector<std::string>& comments) {
  std::ofstream out(path);
  if (!out) throw data_error("cannot write '" + path + "'");
  for (const auto& comment : comments) {
    out << (comment.rfind("#", 0) == 0 ? "" : "# ") << comment << "\n";
  }
  for (std::size_t c = 0; c < columns.size(); ++c) {
    out << columns[c] << (c + 1 < columns.size() ? "," : "");
  }
  out << "\n";
  for (Eigen::Index r = 0; r < values.rows(); ++r) {
    for (Eigen::Index c = 0; c < values.cols(); ++c) {
      out << format_double(values(r, c)) << (c + 1 < values.cols() ? "," : "");
    }
    out << "\n";
  }
  if (!out) throw data_error("write failed for '" + path + "'");
}

std::string format_double(double value) {
  char buffer[40];
  // shortest form that round-trips
  for (int precision : {15, 16, 17}) {
    std::snprintf(buffer, sizeof(buffer), "%.*g", precision, value);
    double parsed = 0.0;
    std::sscanf(buffer, "%lf", &parsed);
    if (parsed == value) return buffer;
  }
  return buffer;
}

std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t hash = 0xCBF29CE484222325ULL;
  for (unsigned char byte : bytes) {
    hash ^= byte;
    hash *= 0x100000001B3ULL;
  }
  return hash;
}

std::string hash_hex(std::uint64_t hash) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(hash));
  return buffer;
}

std::string file_fingerprint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("cannot open '" + path + "' for fingerprinting");
  std::ostringstream ss;
  ss << in.rdbuf();
  return hash_hex(fnv1a(ss.str()));
}

}  // namespace nsgp
