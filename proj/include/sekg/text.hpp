#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sekg {

std::string_view trim(std::string_view s) noexcept;
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b) noexcept;
bool ends_with_icase(std::string_view s, std::string_view suffix) noexcept;
std::vector<std::string> split_whitespace(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

/// Single-pass placeholder substitution: every `{name}` in `tmpl` whose name
/// is a key of `values` is replaced; substituted text is never rescanned and
/// unknown `{...}` sequences are copied through untouched.
std::string render_template(std::string_view tmpl,
                            const std::vector<std::pair<std::string, std::string>>& values);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view data);

std::string read_file(const std::string& path);

/// Writes through a sibling temp file and renames, so readers never observe
/// a partially written artifact.
void write_file_atomic(const std::string& path, std::string_view contents);

}  // namespace sekg
