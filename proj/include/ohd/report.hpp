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

#pragma once

#include <string>
#include <utility>
#include <vector>

namespace ohd {

enum class ReportFormat { table, csv, plotdata };

ReportFormat report_format_from_string(const std::string& s);

// Model rows x dataset columns; rendering appends an arithmetic-mean column.
struct ResultTable {
  std::vector<std::string> row_names;
  std::vector<std::string> col_names;
  std::vector<std::vector<double>> values;  // [row][col]
};

std::string format_table(const ResultTable& table);
std::string format_csv(const ResultTable& table);
ResultTable result_table_from_csv(const std::string& csv);

struct Series {
  std::string name;
  std::vector<std::pair<double, double>> points;
};

// One "# name" header per series, then "x y" lines.
std::string format_plotdata(const std::vector<Series>& series);

}  // namespace ohd
