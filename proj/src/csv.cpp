#include "straw/csv.hpp"

#include <fstream>
#include <sstream>

#include "straw/common.hpp"

namespace straw {

std::string csv_escape(const std::string& field) {
  bool needs_quote = false;
  std::string body;
  body.reserve(field.size());
  for (char c : field) {
    if (c == '\n') {
      body += "\\n";
      needs_quote = true;
      continue;
    }
    if (c == '\\') {
      body += "\\\\";
      needs_quote = true;
      continue;
    }
    if (c == ',' || c == '"') needs_quote = true;
    body += c;
  }
  if (!needs_quote) return body;
  std::string out = "\"";
  for (char c : body) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

std::string csv_unescape_field(const std::string& field) {
  std::string out;
  out.reserve(field.size());
  for (size_t i = 0; i < field.size(); ++i) {
    if (field[i] == '\\' && i + 1 < field.size()) {
      if (field[i + 1] == 'n') {
        out += '\n';
        ++i;
        continue;
      }
      if (field[i + 1] == '\\') {
        out += '\\';
        ++i;
        continue;
      }
    }
    out += field[i];
  }
  return out;
}

std::vector<std::string> csv_split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"' && cur.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(csv_unescape_field(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(csv_unescape_field(cur));
  return fields;
}

std::string csv_join(const std::vector<std::string>& fields) {
  std::string out;
  for (size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(fields[i]);
  }
  return out;
}

int CsvTable::column(const std::string& name) const {
  for (size_t i = 0; i < header.size(); ++i)
    if (header[i] == name) return static_cast<int>(i);
  return -1;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream is(text);
  std::string line;
  bool first = true;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = csv_split_line(line);
    if (first) {
      t.header = fields;
      first = false;
    } else {
      STRAW_CHECK(fields.size() == t.header.size(), "csv row width differs from header");
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path);
  STRAW_CHECK(f.good(), "cannot open csv: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str());
}

std::string csv_to_string(const CsvTable& table) {
  std::string out = csv_join(table.header);
  out += '\n';
  for (const auto& row : table.rows) {
    STRAW_CHECK(row.size() == table.header.size(), "csv row width differs from header");
    out += csv_join(row);
    out += '\n';
  }
  return out;
}

void write_csv(const CsvTable& table, const std::string& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  STRAW_CHECK(f.good(), "cannot open csv for writing: " + path);
  f << csv_to_string(table);
  STRAW_CHECK(f.good(), "csv write failed: " + path);
}

}  // namespace straw
