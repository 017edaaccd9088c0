#pragma once

#include <string>
#include <vector>

namespace straw {

// RFC-ish CSV: fields containing comma, quote or newline are quoted, quotes
// doubled; newlines inside fields are escaped as \n so rows stay one line.
std::string csv_escape(const std::string& field);
std::string csv_unescape_field(const std::string& field);
std::vector<std::string> csv_split_line(const std::string& line);
std::string csv_join(const std::vector<std::string>& fields);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

std::string csv_to_string(const CsvTable& table);
void write_csv(const CsvTable& table, const std::string& path);

}  // namespace straw
