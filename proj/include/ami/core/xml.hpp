#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace ami::xml {

/// Minimal DOM for small descriptor documents (meta.xml). Namespace prefixes
/// are kept in `name`; use local_name() to compare.
struct Element {
  std::string name;
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<Element> children;
  std::string text;
  std::size_t byte_offset = 0;

  std::string_view local_name() const;
  std::optional<std::string> attribute(std::string_view local) const;
  const Element* child(std::string_view local) const;
  std::vector<const Element*> children_named(std::string_view local) const;
};

/// Parses a document and returns its root element. Throws ParseError with the
/// byte offset of the first problem.
Element parse(std::string_view document);

std::string escape(std::string_view text);

}  // namespace ami::xml
