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

#include "twinmod/output.hpp"

#include "twinmod/errors.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>
#include <system_error>

namespace twinmod::output {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

void CsvTable::add_row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw std::invalid_argument("CsvTable: row width differs from header");
  rows_.push_back(std::move(cells));
}

void CsvTable::add_row(const std::vector<double>& values) {
  std::vector<std::string> cells;
  cells.reserve(values.size());
  for (double v : values) cells.push_back(num(v));
  add_row(std::move(cells));
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += cells[i];
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

CsvTable matrix_table(const Eigen::MatrixXd& m, const std::vector<std::string>& row_labels,
                      const std::vector<std::string>& col_labels) {
  if (static_cast<Eigen::Index>(row_labels.size()) != m.rows() ||
      static_cast<Eigen::Index>(col_labels.size()) != m.cols())
    throw std::invalid_argument("matrix_table: label count differs from matrix shape");
  std::vector<std::string> header{"row"};
  header.insert(header.end(), col_labels.begin(), col_labels.end());
  CsvTable t(std::move(header));
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<std::string> cells{row_labels[static_cast<size_t>(i)]};
    for (Eigen::Index j = 0; j < m.cols(); ++j) cells.push_back(num(m(i, j)));
    t.add_row(std::move(cells));
  }
  return t;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out << content;
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

void write_json(const std::filesystem::path& path, const nlohmann::ordered_json& j) {
  write_atomic(path, j.dump(2) + "\n");
}

void write_csv(const std::filesystem::path& path, const CsvTable& table, const nlohmann::ordered_json& meta) {
  write_atomic(path, table.str());
  write_json(path.string() + ".json", meta);
}

}  // namespace twinmod::output
