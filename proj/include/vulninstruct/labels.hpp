#pragma once

#include <optional>
#include <string_view>

namespace vulninstruct {

enum class Label : int { Zero = 0, One = 1, Unparsed = -1 };

inline Label label_from_int(int v) { return v == 1 ? Label::One : Label::Zero; }
inline std::optional<int> label_value(Label l) {
    if (l == Label::Unparsed) return std::nullopt;
    return static_cast<int>(l);
}
std::string_view to_string(Label l);

// Extracts a binary verdict from free-form model output. The first
// standalone '0' or '1' wins; otherwise case-insensitive phrase patterns are
// tried with negations first.
Label parse_label(std::string_view raw_text);

} // namespace vulninstruct
