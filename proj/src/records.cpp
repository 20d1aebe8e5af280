// Copyright 2026 The sparselab Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparselab/records.hpp"

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace sparselab {
namespace {

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_cell(const Cell& cell) {
  if (const auto* d = std::get_if<double>(&cell)) return format_number(*d);
  return quote(std::get<std::string>(cell));
}

double parse_number(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw std::runtime_error("read_csv: malformed number '" + s + "'");
  }
  return value;
}

// Splits one logical CSV record (which may span physical lines inside
// quotes). Quoted fields come back as strings, bare fields as numbers
// unless `all_text`.
bool read_record(std::istream& is, std::vector<Cell>& cells, bool all_text) {
  cells.clear();
  std::string line;
  if (!std::getline(is, line)) return false;
  std::string field;
  bool quoted = false;
  bool in_quotes = false;
  auto flush = [&] {
    if (quoted || all_text) {
      cells.emplace_back(field);
    } else {
      cells.emplace_back(parse_number(field));
    }
    field.clear();
    quoted = false;
  };
  for (std::size_t i = 0;; ++i) {
    if (i == line.size()) {
      if (in_quotes) {
        std::string more;
        if (!std::getline(is, more)) throw std::runtime_error("read_csv: unterminated quote");
        field += '\n';
        line = std::move(more);
        i = static_cast<std::size_t>(-1);
        continue;
      }
      break;
    }
    const char c = line[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      in_quotes = true;
      quoted = true;
    } else if (c == ',') {
      flush();
    } else if (c != '\r') {
      field += c;
    }
  }
  flush();
  return true;
}

}  // namespace

void OutputTable::add_row(std::vector<Cell> cells) {
  if (cells.size() != columns.size()) {
    throw std::logic_error("OutputTable::add_row: expected " + std::to_string(columns.size()) +
                           " cells, got " + std::to_string(cells.size()));
  }
  records.push_back({std::move(cells)});
}

const Cell& OutputTable::at(std::size_t row, const std::string& column) const {
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (columns[j] == column) return records.at(row).cells.at(j);
  }
  throw std::out_of_range("OutputTable: no column '" + column + "'");
}

double OutputTable::number(std::size_t row, const std::string& column) const {
  return std::get<double>(at(row, column));
}

std::string OutputTable::text(std::size_t row, const std::string& column) const {
  return std::get<std::string>(at(row, column));
}

std::string OutputTable::config_value(const std::string& key) const {
  for (const auto& [k, v] : config) {
    if (k == key) return v;
  }
  throw std::out_of_range("OutputTable: no config key '" + key + "'");
}

std::string format_number(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto [ptr, ec] =
      std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
  if (ec != std::errc()) throw std::runtime_error("format_number: conversion failed");
  return std::string(buf, ptr);
}

void write_csv(std::ostream& os, const OutputTable& table) {
  os << "# sparselab " << kVersion << '\n';
  os << "# subcommand=" << table.subcommand << '\n';
  for (const auto& [key, value] : table.config) os << "# " << key << '=' << value << '\n';
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    os << (j ? "," : "") << table.columns[j];
  }
  os << '\n';
  for (const auto& record : table.records) {
    for (std::size_t j = 0; j < record.cells.size(); ++j) {
      os << (j ? "," : "") << format_cell(record.cells[j]);
    }
    os << '\n';
  }
}

OutputTable read_csv(std::istream& is) {
  OutputTable table;
  std::vector<Cell> cells;
  while (is.peek() == '#') {
    std::string line;
    std::getline(is, line);
    const std::string body = line.substr(line.size() > 1 && line[1] == ' ' ? 2 : 1);
    const auto eq = body.find('=');
    if (eq == std::string::npos) continue;  // version banner
    const std::string key = body.substr(0, eq);
    const std::string value = body.substr(eq + 1);
    if (key == "subcommand") {
      table.subcommand = value;
    } else {
      table.config.emplace_back(key, value);
    }
  }
  if (!read_record(is, cells, true)) throw std::runtime_error("read_csv: missing header row");
  for (const auto& c : cells) table.columns.push_back(std::get<std::string>(c));
  if (table.columns.size() == 1 && table.columns[0].empty()) table.columns.clear();
  while (is.peek() != std::char_traits<char>::eof() && read_record(is, cells, false)) {
    if (cells.size() == 1 && std::holds_alternative<std::string>(cells[0]) &&
        std::get<std::string>(cells[0]).empty()) {
      continue;
    }
    table.add_row(cells);
  }
  return table;
}

void write_json(std::ostream& os, const OutputTable& table) {
  nlohmann::ordered_json doc;
  doc["version"] = kVersion;
  doc["subcommand"] = table.subcommand;
  doc["config"] = nlohmann::ordered_json::object();
  for (const auto& [key, value] : table.config) doc["config"][key] = value;
  doc["columns"] = table.columns;
  doc["records"] = nlohmann::ordered_json::array();
  for (const auto& record : table.records) {
    nlohmann::ordered_json row = nlohmann::ordered_json::object();
    for (std::size_t j = 0; j < record.cells.size(); ++j) {
      const auto& cell = record.cells[j];
      if (const auto* d = std::get_if<double>(&cell)) {
        row[table.columns[j]] = std::isfinite(*d) ? nlohmann::ordered_json(*d) : nullptr;
      } else {
        row[table.columns[j]] = std::get<std::string>(cell);
      }
    }
    doc["records"].push_back(std::move(row));
  }
  os << doc.dump(2) << '\n';
}

OutputTable read_json(std::istream& is) {
  const auto doc = nlohmann::ordered_json::parse(is);
  OutputTable table;
  table.subcommand = doc.at("subcommand").get<std::string>();
  for (const auto& [key, value] : doc.at("config").items()) {
    table.config.emplace_back(key, value.get<std::string>());
  }
  table.columns = doc.at("columns").get<std::vector<std::string>>();
  for (const auto& row : doc.at("records")) {
    std::vector<Cell> cells;
    for (const auto& column : table.columns) {
      const auto& v = row.at(column);
      if (v.is_null()) {
        cells.emplace_back(std::numeric_limits<double>::quiet_NaN());
      } else if (v.is_string()) {
        cells.emplace_back(v.get<std::string>());
      } else {
        cells.emplace_back(v.get<double>());
      }
    }
    table.add_row(std::move(cells));
  }
  return table;
}

}  // namespace sparselab
