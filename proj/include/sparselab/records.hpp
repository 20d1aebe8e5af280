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

#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace sparselab {

inline constexpr const char* kVersion = "0.1.0";

using Cell = std::variant<double, std::string>;

/// One output row: cells keyed by column name, in the table's column order.
struct OutputRecord {
  std::vector<Cell> cells;
};

/// A subcommand's output: a parameter echo plus rows with a fixed column set.
///
/// CSV layout: `# sparselab <version>` and `# key=value` comment lines, then
/// the header row, then data rows. Numbers use 17 significant digits and are
/// never quoted; text cells are always quoted (RFC 4180 doubling of quotes).
///
/// JSON layout: {"version", "subcommand", "config": {...}, "columns": [...],
/// "records": [{column: value, ...}, ...]}. Non-finite numbers become null.
struct OutputTable {
  std::string subcommand;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<std::string> columns;
  std::vector<OutputRecord> records;

  void add_row(std::vector<Cell> cells);
  const Cell& at(std::size_t row, const std::string& column) const;
  double number(std::size_t row, const std::string& column) const;
  std::string text(std::size_t row, const std::string& column) const;
  std::string config_value(const std::string& key) const;
};

/// Shortest-safe decimal form with 17 significant digits; "nan", "inf",
/// "-inf" for non-finite values.
std::string format_number(double value);

void write_csv(std::ostream& os, const OutputTable& table);
void write_json(std::ostream& os, const OutputTable& table);
OutputTable read_csv(std::istream& is);
OutputTable read_json(std::istream& is);

}  // namespace sparselab
