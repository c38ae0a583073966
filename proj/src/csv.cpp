#include "sekg/csv.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "sekg/error.hpp"

namespace sekg::csv {

std::vector<Record> read(std::istream& in) {
  std::vector<Record> out;
  Record cur;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  bool record_has_content = false;
  std::size_t line = 1;
  cur.line = 1;

  auto end_field = [&] {
    cur.fields.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    if (record_has_content || !cur.fields.empty()) {
      end_field();
      out.push_back(std::move(cur));
    }
    cur = Record{};
    field.clear();
    field_started = false;
    record_has_content = false;
  };

  char c;
  while (in.get(c)) {
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started && !field.empty()) {
          throw ParseError("stray quote inside unquoted field", line);
        }
        in_quotes = true;
        field_started = true;
        record_has_content = true;
        break;
      case ',':
        record_has_content = true;
        end_field();
        break;
      case '\r':
        break;
      case '\n':
        end_record();
        ++line;
        cur.line = line;
        break;
      default:
        field.push_back(c);
        field_started = true;
        record_has_content = true;
    }
  }
  if (in_quotes) throw ParseError("unterminated quoted field", cur.line);
  end_record();
  return out;
}

std::vector<Record> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path);
  return read(in);
}

std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << ',';
    out << escape(fields[i]);
  }
  out << '\n';
}

Header::Header(const Record& header, const std::vector<std::string>& required) {
  for (const auto& f : header.fields) {
    std::string name = f;
    // tolerate a UTF-8 BOM on the first column
    if (names_.empty() && name.rfind("\xEF\xBB\xBF", 0) == 0) name.erase(0, 3);
    names_.push_back(name);
  }
  for (const auto& r : required) {
    if (!has(r)) throw ParseError("missing column '" + r + "'", header.line);
  }
}

bool Header::has(std::string_view name) const {
  return std::find(names_.begin(), names_.end(), name) != names_.end();
}

std::size_t Header::operator[](std::string_view name) const {
  auto it = std::find(names_.begin(), names_.end(), name);
  if (it == names_.end()) throw ParseError("missing column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names_.begin());
}

}  // namespace sekg::csv
