#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string_view>

namespace qaexpert {

// Integer codes are part of the contract: MAE/R2 are computed on them and
// every per-class table is ordered by them.
enum class Label : int { Expert = 0, NonExpert = 1, OutOfScope = 2 };

inline constexpr std::size_t kNumClasses = 3;
inline constexpr std::array<Label, kNumClasses> kAllLabels = {
    Label::Expert, Label::NonExpert, Label::OutOfScope};

constexpr int code(Label label) { return static_cast<int>(label); }
constexpr std::size_t index(Label label) { return static_cast<std::size_t>(label); }

Label label_from_code(int value);

// Canonical names are "expert", "nonexpert", "out_of_scope". Parsing also
// accepts single letters (E/N/O), the integer codes and a few spellings.
std::string_view to_string(Label label);
std::optional<Label> parse_label(std::string_view text);
Label parse_label_or_throw(std::string_view text);

}  // namespace qaexpert
