// Copyright (C) 2026 The agridet authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace agridet {

/// Minimal XML element tree covering the annotation schema: elements,
/// attributes, character data with the five standard entities, comments,
/// and an optional leading declaration. No namespaces, CDATA, or DTDs.
struct XmlNode {
  std::string name;
  std::string text;  // concatenated character data, entities decoded, trimmed
  std::vector<std::pair<std::string, std::string>> attributes;
  std::vector<XmlNode> children;
  int line = 0;  // 1-based line of the opening tag

  const XmlNode* child(std::string_view child_name) const;
  /// First child with the given name; throws ParseError naming the missing
  /// element and this node's line when absent.
  const XmlNode& require(std::string_view child_name) const;
};

/// Parse a document into its root element. Throws ParseError with line
/// context on malformed markup.
XmlNode xml_parse(std::string_view text);

std::string xml_escape(std::string_view text);

}  // namespace agridet
