#pragma once

// Minimal CSV reader/writer for the analyzer tables and run logs. Fields
// never contain commas or quotes, so no escaping is implemented.

#include <string>
#include <vector>

namespace mgiad::csv {

inline std::string write(const std::vector<std::vector<std::string>>& rows) {
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += row[i];
    }
    out += '\n';
  }
  return out;
}

inline std::vector<std::vector<std::string>> parse(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  for (char c : text) {
    if (c == '\n') {
      row.push_back(field);
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else if (c == ',') {
      row.push_back(field);
      field.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(field);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace mgiad::csv
