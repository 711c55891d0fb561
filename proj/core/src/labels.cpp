#include "qaexpert/labels.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include "qaexpert/error.hpp"

namespace qaexpert {

Label label_from_code(int value) {
  require(value >= 0 && value < static_cast<int>(kNumClasses), ErrorCode::kInvalidArgument,
          "label code out of range: " + std::to_string(value));
  return static_cast<Label>(value);
}

std::string_view to_string(Label label) {
  switch (label) {
    case Label::Expert: return "expert";
    case Label::NonExpert: return "nonexpert";
    case Label::OutOfScope: return "out_of_scope";
  }
  return "unknown";
}

std::optional<Label> parse_label(std::string_view text) {
  std::string key;
  for (char c : text) {
    if (c == '-' || c == '_' || c == ' ') continue;
    key.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  if (key == "expert" || key == "e" || key == "0") return Label::Expert;
  if (key == "nonexpert" || key == "n" || key == "1") return Label::NonExpert;
  if (key == "outofscope" || key == "oos" || key == "o" || key == "2") return Label::OutOfScope;
  return std::nullopt;
}

Label parse_label_or_throw(std::string_view text) {
  auto label = parse_label(text);
  if (!label) fail(ErrorCode::kInvalidArgument, "unknown label: '" + std::string(text) + "'");
  return *label;
}

}  // namespace qaexpert
