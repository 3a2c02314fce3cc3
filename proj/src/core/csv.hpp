// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "core/error.hpp"
#include "core/strutil.hpp"

namespace mvsync {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(std::string_view name) const {
    for (size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    throw StructureError("csv: missing column '" + std::string(name) + "'");
  }
};

// Lines starting with '#' are comments (provenance notes) and are skipped.
inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("read_csv: cannot open " + path);
  CsvTable table;
  std::string line;
  do {
    if (!std::getline(in, line))
      throw StructureError("read_csv: empty file " + path);
  } while (trim(line).empty() || trim(line).front() == '#');
  for (auto f : split(trim(line), ',')) table.header.emplace_back(trim(f));
  while (std::getline(in, line)) {
    auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    auto fields = split(t, ',');
    if (fields.size() != table.header.size())
      throw StructureError("read_csv: ragged row in " + path);
    std::vector<double> row;
    row.reserve(fields.size());
    for (auto f : fields) row.push_back(parse_double(trim(f)));
    table.rows.push_back(std::move(row));
  }
  return table;
}

class CsvWriter {
 public:
  // A non-empty comment is written as a leading '#' line (provenance).
  CsvWriter(const std::string& path, const std::vector<std::string>& header,
            const std::string& comment = "") {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    out_.open(path);
    if (!out_) throw IoError("CsvWriter: cannot open " + path);
    if (!comment.empty()) out_ << "# " << comment << '\n';
    columns_ = header.size();
    for (size_t i = 0; i < header.size(); ++i) {
      if (i) out_ << ',';
      out_ << header[i];
    }
    out_ << '\n';
  }

  void row(const std::vector<double>& values) {
    if (values.size() != columns_) throw ArgumentError("CsvWriter: ragged row");
    for (size_t i = 0; i < values.size(); ++i) {
      if (i) out_ << ',';
      out_ << format_double(values[i]);
    }
    out_ << '\n';
  }

  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
  size_t columns_ = 0;
};

}  // namespace mvsync
