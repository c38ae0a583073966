#pragma once

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace sekg::csv {

/// One parsed record plus the 1-based line number it started on.
struct Record {
  std::vector<std::string> fields;
  std::size_t line = 0;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded newlines, CRLF.
/// Blank lines are skipped.
std::vector<Record> read(std::istream& in);
std::vector<Record> read_file(const std::string& path);

/// Quotes a field only when it contains a comma, quote, CR or LF.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Header lookup helper: index of each required column, or ParseError
/// naming the first missing one.
class Header {
 public:
  Header(const Record& header, const std::vector<std::string>& required);

  std::size_t operator[](std::string_view name) const;
  bool has(std::string_view name) const;

 private:
  std::vector<std::string> names_;
};

}  // namespace sekg::csv
