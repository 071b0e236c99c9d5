// Copyright 2026 The twinmod Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <filesystem>
#include <string>
#include <vector>

namespace twinmod::output {

/// "%.12g"; every number written by the artifact goes through here.
std::string num(double v);

/// Plain CSV: comma separated, dot decimal, one header line.
class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  void add_row(std::vector<std::string> cells);
  void add_row(const std::vector<double>& values);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

/// Matrix with a label column and a header row of column labels.
CsvTable matrix_table(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels);

/// Writes to "<path>.tmp" and renames over path. Throws IoError.
void write_atomic(const std::filesystem::path& path, const std::string& content);

/// CSV plus "<path>.json" sidecar.
void write_csv(const std::filesystem::path& path, const CsvTable& table, const nlohmann::ordered_json& meta);

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j);

}  // namespace twinmod::output
