#include "ami/core/xml.hpp"

#include <cctype>
#include <cstdint>

#include "ami/core/error.hpp"

namespace ami::xml {

std::string_view Element::local_name() const {
  const auto colon = name.find(':');
  return colon == std::string::npos ? std::string_view(name) : std::string_view(name).substr(colon + 1);
}

namespace {

std::string_view local_of(std::string_view qualified) {
  const auto colon = qualified.find(':');
  return colon == std::string_view::npos ? qualified : qualified.substr(colon + 1);
}

void append_utf8(std::string& out, std::uint32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

class Parser {
 public:
  explicit Parser(std::string_view doc) : doc_(doc) {}

  Element parse_document() {
    skip_prolog();
    if (pos_ >= doc_.size() || doc_[pos_] != '<') fail("expected root element");
    Element root = parse_element();
    skip_misc();
    if (pos_ != doc_.size()) fail("content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const { throw ParseError("meta.xml: " + what, pos_); }

  bool starts_with(std::string_view s) const { return doc_.substr(pos_).starts_with(s); }

  void skip_ws() {
    while (pos_ < doc_.size() && std::isspace(static_cast<unsigned char>(doc_[pos_]))) ++pos_;
  }

  void skip_until(std::string_view terminator) {
    const auto end = doc_.find(terminator, pos_);
    if (end == std::string_view::npos) fail("unterminated construct, expected '" + std::string(terminator) + "'");
    pos_ = end + terminator.size();
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<!--")) {
        skip_until("-->");
      } else if (starts_with("<?")) {
        skip_until("?>");
      } else {
        return;
      }
    }
  }

  void skip_prolog() {
    if (starts_with("\xEF\xBB\xBF")) pos_ += 3;
    for (;;) {
      skip_misc();
      if (starts_with("<!DOCTYPE")) {
        skip_until(">");
      } else {
        return;
      }
    }
  }

  std::string parse_name() {
    const std::size_t start = pos_;
    while (pos_ < doc_.size()) {
      const char c = doc_[pos_];
      if (std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == ':' || c == '-' || c == '.' ||
          static_cast<unsigned char>(c) >= 0x80) {
        ++pos_;
      } else {
        break;
      }
    }
    if (pos_ == start) fail("expected a name");
    return std::string(doc_.substr(start, pos_ - start));
  }

  std::string decode_entities(std::string_view raw, std::size_t raw_offset) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] != '&') {
        out.push_back(raw[i]);
        continue;
      }
      const auto semi = raw.find(';', i);
      if (semi == std::string_view::npos) {
        pos_ = raw_offset + i;
        fail("unterminated entity");
      }
      const auto ent = raw.substr(i + 1, semi - i - 1);
      if (ent == "lt") out.push_back('<');
      else if (ent == "gt") out.push_back('>');
      else if (ent == "amp") out.push_back('&');
      else if (ent == "quot") out.push_back('"');
      else if (ent == "apos") out.push_back('\'');
      else if (ent.size() > 1 && ent[0] == '#') {
        std::uint32_t cp = 0;
        try {
          cp = ent[1] == 'x' || ent[1] == 'X'
                   ? static_cast<std::uint32_t>(std::stoul(std::string(ent.substr(2)), nullptr, 16))
                   : static_cast<std::uint32_t>(std::stoul(std::string(ent.substr(1)), nullptr, 10));
        } catch (const std::exception&) {
          pos_ = raw_offset + i;
          fail("bad character reference");
        }
        append_utf8(out, cp);
      } else {
        pos_ = raw_offset + i;
        fail("unknown entity &" + std::string(ent) + ";");
      }
      i = semi;
    }
    return out;
  }

  Element parse_element() {
    Element el;
    el.byte_offset = pos_;
    ++pos_;  // '<'
    el.name = parse_name();
    for (;;) {
      skip_ws();
      if (pos_ >= doc_.size()) fail("unterminated start tag <" + el.name + ">");
      if (starts_with("/>")) {
        pos_ += 2;
        return el;
      }
      if (doc_[pos_] == '>') {
        ++pos_;
        break;
      }
      std::string attr = parse_name();
      skip_ws();
      if (pos_ >= doc_.size() || doc_[pos_] != '=') fail("expected '=' after attribute " + attr);
      ++pos_;
      skip_ws();
      if (pos_ >= doc_.size() || (doc_[pos_] != '"' && doc_[pos_] != '\'')) fail("expected quoted attribute value");
      const char q = doc_[pos_++];
      const auto end = doc_.find(q, pos_);
      if (end == std::string_view::npos) fail("unterminated attribute value");
      const std::size_t value_at = pos_;
      std::string value = decode_entities(doc_.substr(pos_, end - pos_), value_at);
      pos_ = end + 1;
      el.attributes.emplace_back(std::move(attr), std::move(value));
    }
    // content
    for (;;) {
      if (pos_ >= doc_.size()) fail("unterminated element <" + el.name + ">");
      if (starts_with("</")) {
        pos_ += 2;
        const std::string closing = parse_name();
        if (closing != el.name) fail("mismatched closing tag </" + closing + "> for <" + el.name + ">");
        skip_ws();
        if (pos_ >= doc_.size() || doc_[pos_] != '>') fail("expected '>'");
        ++pos_;
        return el;
      }
      if (starts_with("<!--")) {
        skip_until("-->");
      } else if (starts_with("<![CDATA[")) {
        pos_ += 9;
        const auto end = doc_.find("]]>", pos_);
        if (end == std::string_view::npos) fail("unterminated CDATA");
        el.text.append(doc_.substr(pos_, end - pos_));
        pos_ = end + 3;
      } else if (starts_with("<?")) {
        skip_until("?>");
      } else if (doc_[pos_] == '<') {
        el.children.push_back(parse_element());
      } else {
        const auto end = doc_.find('<', pos_);
        const std::size_t stop = end == std::string_view::npos ? doc_.size() : end;
        el.text += decode_entities(doc_.substr(pos_, stop - pos_), pos_);
        pos_ = stop;
      }
    }
  }

  std::string_view doc_;
  std::size_t pos_ = 0;
};

}  // namespace

std::optional<std::string> Element::attribute(std::string_view local) const {
  for (const auto& [k, v] : attributes)
    if (local_of(k) == local) return v;
  return std::nullopt;
}

const Element* Element::child(std::string_view local) const {
  for (const auto& c : children)
    if (c.local_name() == local) return &c;
  return nullptr;
}

std::vector<const Element*> Element::children_named(std::string_view local) const {
  std::vector<const Element*> out;
  for (const auto& c : children)
    if (c.local_name() == local) out.push_back(&c);
  return out;
}

Element parse(std::string_view document) { return Parser(document).parse_document(); }

std::string escape(std::string_view text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      case '\t': out += "&#9;"; break;
      case '\n': out += "&#10;"; break;
      case '\r': out += "&#13;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace ami::xml
