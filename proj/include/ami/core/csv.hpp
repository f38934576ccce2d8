#pragma once

#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace ami::csv {

struct Dialect {
  char delimiter = ',';
  std::optional<char> quote = '"';
};

struct Row {
  std::vector<std::string> fields;
  std::size_t line = 0;  // 1-based line where the row starts
  std::size_t byte_offset = 0;
};

/// Splits delimited text into rows. Quoted fields may contain delimiters,
/// doubled quotes and newlines. A trailing newline does not produce an empty
/// row; blank lines are skipped.
std::vector<Row> parse(std::string_view text, const Dialect& dialect = {});

/// Writes one row terminated by '\n'. Fields are quoted only when they need
/// to be and the dialect has a quote character.
void write_row(std::ostream& out, const std::vector<std::string>& fields, const Dialect& dialect = {});

std::string format_row(const std::vector<std::string>& fields, const Dialect& dialect = {});

}  // namespace ami::csv
