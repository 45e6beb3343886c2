#include "vulninstruct/labels.hpp"

#include "vulninstruct/util.hpp"

#include <array>
#include <cctype>

namespace vulninstruct {

std::string_view to_string(Label l) {
    switch (l) {
    case Label::Zero: return "0";
    case Label::One: return "1";
    case Label::Unparsed: return "unparsed";
    }
    return "unparsed";
}

namespace {

bool word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; }

bool contains_word(std::string_view text, std::string_view word) {
    std::size_t pos = 0;
    while ((pos = text.find(word, pos)) != std::string_view::npos) {
        bool left = pos == 0 || !word_char(text[pos - 1]);
        bool right = pos + word.size() >= text.size() || !word_char(text[pos + word.size()]);
        if (left && right) return true;
        ++pos;
    }
    return false;
}

constexpr std::array<std::string_view, 8> kNegative = {
    "not vulnerable",    "no vulnerab",       "non-vulnerable",  "does not contain any vulnerab",
    "doesn't contain any vulnerab", "does not contain a vulnerab", "no security vulnerab", "free of vulnerab",
};
constexpr std::array<std::string_view, 3> kPositive = {"vulnerable", "contains a vulnerab", "vulnerability exists"};

} // namespace

Label parse_label(std::string_view raw) {
    for (std::size_t i = 0; i < raw.size(); ++i) {
        char c = raw[i];
        if (c != '0' && c != '1') continue;
        if (i > 0 && (word_char(raw[i - 1]) || raw[i - 1] == '.')) continue;
        if (i + 1 < raw.size()) {
            char n = raw[i + 1];
            if (word_char(n)) continue;
            if ((n == '.' || n == ',') && i + 2 < raw.size() && std::isdigit(static_cast<unsigned char>(raw[i + 2])))
                continue;
        }
        return c == '1' ? Label::One : Label::Zero;
    }
    const std::string lower = to_lower(raw);
    for (auto p : kNegative)
        if (lower.find(p) != std::string::npos) return Label::Zero;
    for (auto p : kPositive)
        if (lower.find(p) != std::string::npos) return Label::One;
    if (contains_word(lower, "yes")) return Label::One;
    return Label::Unparsed;
}

} // namespace vulninstruct
