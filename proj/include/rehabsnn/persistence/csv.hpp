#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

namespace rehabsnn::persistence {

using CsvValue = std::variant<double, std::int64_t, std::string>;
using CsvRow = std::map<std::string, CsvValue>;

// Writes a header plus one line per row, columns in schema order. Reals use %.6g,
// integers are written exactly. Every row must provide exactly the schema's columns.
// The file is written to a temporary sibling and renamed into place.
void write_metrics_csv(const std::string& path, const std::vector<std::string>& columns,
                       const std::vector<CsvRow>& rows);

std::string format_real(double v);

// Minimal reader for files written above (no quoting).
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;
};
CsvTable read_csv(const std::string& path);

// Writes `contents` to path via a temporary file and rename.
void write_file_atomic(const std::string& path, const std::string& contents);

}  // namespace rehabsnn::persistence
