// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#include "agridet/xml.hpp"

#include <cctype>
#include <sstream>

#include "agridet/errors.hpp"

namespace agridet {

namespace {

bool is_name_start(char c) {
  return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == ':';
}

bool is_name_char(char c) {
  return is_name_start(c) || std::isdigit(static_cast<unsigned char>(c)) || c == '-' ||
         c == '.';
}

class Parser {
 public:
  explicit Parser(std::string_view text) : text_(text) {}

  XmlNode parse_document() {
    skip_prolog();
    if (at_end() || peek() != '<') fail("expected root element");
    XmlNode root = parse_element();
    skip_misc();
    if (!at_end()) fail("trailing content after root element");
    return root;
  }

 private:
  [[noreturn]] void fail(const std::string& what) const {
    std::ostringstream msg;
    msg << "xml parse error at line " << line_ << ": " << what;
    throw ParseError(msg.str());
  }

  bool at_end() const { return pos_ >= text_.size(); }
  char peek() const { return text_[pos_]; }
  bool starts_with(std::string_view s) const { return text_.substr(pos_, s.size()) == s; }

  char take() {
    if (at_end()) fail("unexpected end of document");
    const char c = text_[pos_++];
    if (c == '\n') ++line_;
    return c;
  }

  void skip_ws() {
    while (!at_end() && std::isspace(static_cast<unsigned char>(peek()))) take();
  }

  void skip_until(std::string_view terminator, const char* what) {
    while (!at_end()) {
      if (starts_with(terminator)) {
        for (std::size_t i = 0; i < terminator.size(); ++i) take();
        return;
      }
      take();
    }
    fail(std::string("unterminated ") + what);
  }

  void skip_prolog() {
    skip_ws();
    if (starts_with("<?")) {
      skip_until("?>", "declaration");
    }
    skip_misc();
  }

  void skip_misc() {
    for (;;) {
      skip_ws();
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
        continue;
      }
      return;
    }
  }

  std::string parse_name() {
    if (at_end() || !is_name_start(peek())) fail("expected a name");
    std::string name;
    while (!at_end() && is_name_char(peek())) name.push_back(take());
    return name;
  }

  std::string decode_entity() {
    // Called just after '&'.
    std::string entity;
    while (!at_end() && peek() != ';') {
      entity.push_back(take());
      if (entity.size() > 8) fail("malformed entity reference");
    }
    if (at_end()) fail("unterminated entity reference");
    take();  // ';'
    if (entity == "amp") return "&";
    if (entity == "lt") return "<";
    if (entity == "gt") return ">";
    if (entity == "quot") return "\"";
    if (entity == "apos") return "'";
    fail("unknown entity '&" + entity + ";'");
  }

  std::string parse_attribute_value() {
    const char quote = take();
    if (quote != '"' && quote != '\'') fail("attribute value must be quoted");
    std::string value;
    while (!at_end() && peek() != quote) {
      if (peek() == '&') {
        take();
        value += decode_entity();
      } else {
        value.push_back(take());
      }
    }
    if (at_end()) fail("unterminated attribute value");
    take();  // closing quote
    return value;
  }

  XmlNode parse_element() {
    XmlNode node;
    node.line = line_;
    take();  // '<'
    node.name = parse_name();

    for (;;) {
      skip_ws();
      if (at_end()) fail("unterminated start tag <" + node.name + ">");
      if (peek() == '>') {
        take();
        break;
      }
      if (starts_with("/>")) {
        take();
        take();
        return node;  // empty element
      }
      std::string attr = parse_name();
      skip_ws();
      if (at_end() || take() != '=') fail("expected '=' in attribute of <" + node.name + ">");
      skip_ws();
      node.attributes.emplace_back(std::move(attr), parse_attribute_value());
    }

    std::string text;
    for (;;) {
      if (at_end()) fail("missing closing tag </" + node.name + ">");
      if (starts_with("<!--")) {
        skip_until("-->", "comment");
        continue;
      }
      if (starts_with("</")) {
        take();
        take();
        const int close_line = line_;
        std::string closing = parse_name();
        if (closing != node.name) {
          std::ostringstream msg;
          msg << "mismatched closing tag </" << closing << "> for <" << node.name
              << "> opened at line " << node.line;
          line_ = close_line;
          fail(msg.str());
        }
        skip_ws();
        if (at_end() || take() != '>') fail("malformed closing tag </" + node.name + ">");
        break;
      }
      if (peek() == '<') {
        node.children.push_back(parse_element());
        continue;
      }
      if (peek() == '&') {
        take();
        text += decode_entity();
        continue;
      }
      text.push_back(take());
    }

    // Trim surrounding whitespace from character data.
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) {
      node.text.clear();
    } else {
      const auto last = text.find_last_not_of(" \t\r\n");
      node.text = text.substr(first, last - first + 1);
    }
    return node;
  }

  std::string_view text_;
  std::size_t pos_ = 0;
  int line_ = 1;
};

}  // namespace

const XmlNode* XmlNode::child(std::string_view child_name) const {
  for (const XmlNode& c : children) {
    if (c.name == child_name) return &c;
  }
  return nullptr;
}

const XmlNode& XmlNode::require(std::string_view child_name) const {
  const XmlNode* c = child(child_name);
  if (!c) {
    std::ostringstream msg;
    msg << "missing required element <" << child_name << "> inside <" << name
        << "> (line " << line << ")";
    throw ParseError(msg.str());
  }
  return *c;
}

XmlNode xml_parse(std::string_view text) { return Parser(text).parse_document(); }

std::string xml_escape(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

}  // namespace agridet
