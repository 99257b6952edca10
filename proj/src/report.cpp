// Copyright 2026 The OHD Toolkit Authors.
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

#include "ohd/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "ohd/errors.hpp"

namespace ohd {

ReportFormat report_format_from_string(const std::string& s) {
  if (s == "table") return ReportFormat::table;
  if (s == "csv") return ReportFormat::csv;
  if (s == "plotdata") return ReportFormat::plotdata;
  throw ValidationError("unknown report format: " + s);
}

namespace {

void validate(const ResultTable& table) {
  if (table.values.size() != table.row_names.size()) {
    throw ValidationError("result table: row count mismatch");
  }
  for (const auto& row : table.values) {
    if (row.size() != table.col_names.size()) {
      throw ValidationError("result table: column count mismatch");
    }
  }
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

double row_mean(const std::vector<double>& row) {
  double s = 0.0;
  for (double v : row) s += v;
  return row.empty() ? 0.0 : s / static_cast<double>(row.size());
}

}  // namespace

std::string format_table(const ResultTable& table) {
  validate(table);
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> header{"Model"};
  header.insert(header.end(), table.col_names.begin(), table.col_names.end());
  header.push_back("Avg.");
  cells.push_back(header);
  for (std::size_t r = 0; r < table.row_names.size(); ++r) {
    std::vector<std::string> row{table.row_names[r]};
    for (double v : table.values[r]) row.push_back(fmt(v));
    row.push_back(fmt(row_mean(table.values[r])));
    cells.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(cells.front().size(), 0);
  for (const auto& row : cells) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      widths[c] = std::max(widths[c], row[c].size());
    }
  }
  std::ostringstream out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) out << "  ";
      out << cells[r][c];
      for (std::size_t p = cells[r][c].size(); p < widths[c]; ++p) out << ' ';
    }
    out << '\n';
    if (r == 0) {
      for (std::size_t c = 0; c < widths.size(); ++c) {
        if (c) out << "  ";
        out << std::string(widths[c], '-');
      }
      out << '\n';
    }
  }
  return out.str();
}

std::string format_csv(const ResultTable& table) {
  validate(table);
  std::ostringstream out;
  out << "model";
  for (const auto& c : table.col_names) out << ',' << c;
  out << ",avg\n";
  for (std::size_t r = 0; r < table.row_names.size(); ++r) {
    out << table.row_names[r];
    char buf[32];
    for (double v : table.values[r]) {
      std::snprintf(buf, sizeof(buf), "%.17g", v);
      out << ',' << buf;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", row_mean(table.values[r]));
    out << ',' << buf << '\n';
  }
  return out.str();
}

ResultTable result_table_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty csv");
  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
      if (c == ',') {
        out.push_back(cur);
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    out.push_back(cur);
    return out;
  };
  auto header = split(line);
  if (header.size() < 3 || header.back() != "avg") {
    throw ParseError("csv header must be model,<cols...>,avg");
  }
  ResultTable table;
  table.col_names.assign(header.begin() + 1, header.end() - 1);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError("csv row width mismatch: " + line);
    }
    table.row_names.push_back(cells.front());
    std::vector<double> row;
    for (std::size_t i = 1; i + 1 < cells.size(); ++i) {
      try {
        std::size_t used = 0;
        row.push_back(std::stod(cells[i], &used));
        if (used != cells[i].size()) {
          throw ParseError("csv cell is not a number: " + cells[i]);
        }
      } catch (const std::logic_error&) {
        throw ParseError("csv cell is not a number: " + cells[i]);
      }
    }
    table.values.push_back(std::move(row));
  }
  return table;
}

std::string format_plotdata(const std::vector<Series>& series) {
  std::ostringstream out;
  char buf[80];
  for (const auto& s : series) {
    out << "# " << s.name << '\n';
    for (const auto& [x, y] : s.points) {
      std::snprintf(buf, sizeof(buf), "%.17g %.17g\n", x, y);
      out << buf;
    }
  }
  return out.str();
}

}  // namespace ohd
