#include "rehabsnn/persistence/csv.hpp"

#include "rehabsnn/error.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace rehabsnn::persistence {

std::string format_real(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  const std::filesystem::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write '" + path + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) throw DataError("write to '" + path + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw DataError("cannot move '" + tmp + "' into place: " + ec.message());
}

void write_metrics_csv(const std::string& path, const std::vector<std::string>& columns,
                       const std::vector<CsvRow>& rows) {
  std::ostringstream os;
  for (std::size_t i = 0; i < columns.size(); ++i) os << (i ? "," : "") << columns[i];
  os << '\n';
  const std::set<std::string> known(columns.begin(), columns.end());
  for (const CsvRow& row : rows) {
    for (const auto& [k, v] : row) {
      if (known.count(k) == 0) throw DataError("CSV row has unknown column '" + k + "' for " + path);
    }
    for (std::size_t i = 0; i < columns.size(); ++i) {
      auto it = row.find(columns[i]);
      if (it == row.end()) throw DataError("CSV row is missing column '" + columns[i] + "' for " + path);
      if (i) os << ',';
      std::visit(
          [&os](const auto& v) {
            using T = std::decay_t<decltype(v)>;
            if constexpr (std::is_same_v<T, double>) {
              os << format_real(v);
            } else {
              os << v;
            }
          },
          it->second);
    }
    os << '\n';
  }
  write_file_atomic(path, os.str());
}

int CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  throw DataError("CSV has no column '" + name + "'");
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + path + "' is empty");
  t.columns = split(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = split(line);
    if (cells.size() != t.columns.size()) throw DataError("ragged row in '" + path + "'");
    t.rows.push_back(std::move(cells));
  }
  return t;
}

}  // namespace rehabsnn::persistence
