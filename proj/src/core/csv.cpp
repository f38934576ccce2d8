#include "ami/core/csv.hpp"

#include <sstream>

namespace ami::csv {

std::vector<Row> parse(std::string_view text, const Dialect& dialect) {
  std::vector<Row> rows;
  Row current;
  std::string field;
  bool in_quotes = false;
  bool row_has_content = false;
  std::size_t line = 1;
  current.line = 1;
  current.byte_offset = 0;

  auto finish_row = [&](std::size_t next_offset) {
    if (row_has_content || !current.fields.empty() || !field.empty()) {
      current.fields.push_back(std::move(field));
      rows.push_back(std::move(current));
    }
    current = Row{};
    current.line = line;
    current.byte_offset = next_offset;
    field.clear();
    row_has_content = false;
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == *dialect.quote) {
        if (i + 1 < text.size() && text[i + 1] == *dialect.quote) {
          field.push_back(c);
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    if (dialect.quote && c == *dialect.quote && field.empty()) {
      in_quotes = true;
      row_has_content = true;
    } else if (c == dialect.delimiter) {
      current.fields.push_back(std::move(field));
      field.clear();
      row_has_content = true;
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      // handled by the '\n' branch
    } else if (c == '\n') {
      ++line;
      finish_row(i + 1);
    } else {
      field.push_back(c);
      row_has_content = true;
    }
  }
  finish_row(text.size());
  return rows;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields, const Dialect& dialect) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out << dialect.delimiter;
    const std::string& f = fields[i];
    const bool needs_quotes =
        dialect.quote && (f.find(dialect.delimiter) != std::string::npos ||
                          f.find(*dialect.quote) != std::string::npos ||
                          f.find('\n') != std::string::npos || f.find('\r') != std::string::npos);
    if (!needs_quotes) {
      out << f;
      continue;
    }
    out << *dialect.quote;
    for (char c : f) {
      if (c == *dialect.quote) out << c;
      out << c;
    }
    out << *dialect.quote;
  }
  out << '\n';
}

std::string format_row(const std::vector<std::string>& fields, const Dialect& dialect) {
  std::ostringstream s;
  write_row(s, fields, dialect);
  return s.str();
}

}  // namespace ami::csv
