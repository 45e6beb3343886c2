#include "vulninstruct/lexer.hpp"

#include "vulninstruct/errors.hpp"

#include <array>
#include <cctype>

namespace vulninstruct {
namespace {

const std::unordered_set<std::string>& keyword_set() {
    static const std::unordered_set<std::string> kw = {
        // C
        "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
        "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
        "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch",
        "typedef", "union", "unsigned", "void", "volatile", "while", "_Bool", "_Complex",
        "_Imaginary", "_Alignas", "_Alignof", "_Atomic", "_Generic", "_Noreturn",
        "_Static_assert", "_Thread_local",
        // C++
        "alignas", "alignof", "and", "and_eq", "asm", "bitand", "bitor", "bool", "catch",
        "char8_t", "char16_t", "char32_t", "class", "compl", "concept", "consteval",
        "constexpr", "constinit", "const_cast", "co_await", "co_return", "co_yield",
        "decltype", "delete", "dynamic_cast", "explicit", "export", "false", "friend",
        "mutable", "namespace", "new", "noexcept", "not", "not_eq", "nullptr", "operator",
        "or", "or_eq", "private", "protected", "public", "reinterpret_cast", "requires",
        "static_assert", "static_cast", "template", "this", "thread_local", "throw", "true",
        "try", "typeid", "typename", "using", "virtual", "wchar_t", "xor", "xor_eq",
        // common compiler extensions
        "__attribute__", "__inline", "__inline__", "__restrict", "__restrict__", "__asm__",
        "__volatile__", "__extension__", "__typeof__", "typeof", "__const",
    };
    return kw;
}

// Longest-first punctuator table.
constexpr std::array<std::string_view, 24> kMultiPunct = {
    ">>=", "<<=", "...", "->*", "->", "++", "--", "<<", ">>", "<=", ">=", "==",
    "!=",  "&&",  "||",  "+=",  "-=", "*=", "/=", "%=", "&=", "|=", "^=", "::",
};

bool ident_start(char c) { return std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }
bool ident_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '$'; }

} // namespace

bool is_keyword(std::string_view word) { return keyword_set().count(std::string(word)) > 0; }

bool is_valid_identifier(std::string_view word) {
    if (word.empty() || !ident_start(word[0])) return false;
    for (char c : word)
        if (!ident_char(c)) return false;
    return !is_keyword(word);
}

bool TypeNames::contains(std::string_view word) const {
    if (names.count(std::string(word))) return true;
    return suffix_t_is_type && word.size() > 2 && word.substr(word.size() - 2) == "_t";
}

const TypeNames& TypeNames::defaults() {
    static const TypeNames tn{
        {"size_t", "ssize_t", "ptrdiff_t", "intptr_t", "uintptr_t", "off_t", "FILE", "BYTE",
         "WORD", "DWORD", "QWORD", "BOOL", "u8", "u16", "u32", "u64", "s8", "s16", "s32",
         "s64", "__u8", "__u16", "__u32", "__u64", "__s8", "__s16", "__s32", "__s64",
         "__le16", "__le32", "__le64", "__be16", "__be32", "__be64", "gboolean", "gchar",
         "gint", "guint", "gsize", "gpointer", "uint", "ulong", "ushort", "uchar", "va_list",
         "std", "string", "vector"},
        true};
    return tn;
}

std::vector<Token> lex(std::string_view src) {
    std::vector<Token> out;
    std::size_t i = 0;
    int line = 1;
    bool line_start = true; // only whitespace seen since the last newline

    auto push = [&](TokenKind kind, std::size_t begin, std::size_t end, int at_line) {
        out.push_back(Token{kind, std::string(src.substr(begin, end - begin)), begin, at_line});
    };
    auto count_newlines = [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k)
            if (src[k] == '\n') ++line;
    };
    auto lex_quoted = [&](std::size_t begin, char quote, TokenKind kind) {
        std::size_t j = begin;
        while (src[j] != quote) ++j; // skip encoding prefix
        ++j;
        while (true) {
            if (j >= src.size() || src[j] == '\n')
                throw LexError(kind == TokenKind::String ? "unterminated string literal"
                                                          : "unterminated character literal",
                               line);
            if (src[j] == '\\') {
                if (j + 1 < src.size() && src[j + 1] == '\n') ++line;
                j += 2;
                continue;
            }
            if (src[j] == quote) break;
            ++j;
        }
        push(kind, begin, j + 1, line);
        i = j + 1;
    };

    while (i < src.size()) {
        char c = src[i];
        if (c == '\n') {
            ++line;
            ++i;
            line_start = true;
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(c))) {
            ++i;
            continue;
        }
        if (c == '\\' && i + 1 < src.size() && src[i + 1] == '\n') {
            i += 2;
            ++line;
            continue;
        }
        bool at_line_start = line_start;
        line_start = false;

        if (c == '#' && at_line_start) {
            std::size_t j = i;
            int start_line = line;
            while (j < src.size() && src[j] != '\n') {
                if (src[j] == '\\' && j + 1 < src.size() && src[j + 1] == '\n') {
                    j += 2;
                    ++line;
                    continue;
                }
                ++j;
            }
            push(TokenKind::Preprocessor, i, j, start_line);
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '/') {
            std::size_t j = src.find('\n', i);
            if (j == std::string_view::npos) j = src.size();
            push(TokenKind::Comment, i, j, line);
            i = j;
            continue;
        }
        if (c == '/' && i + 1 < src.size() && src[i + 1] == '*') {
            std::size_t j = src.find("*/", i + 2);
            if (j == std::string_view::npos) throw LexError("unterminated block comment", line);
            int start_line = line;
            count_newlines(i, j + 2);
            push(TokenKind::Comment, i, j + 2, start_line);
            i = j + 2;
            continue;
        }
        if (c == '"') {
            lex_quoted(i, '"', TokenKind::String);
            continue;
        }
        if (c == '\'') {
            lex_quoted(i, '\'', TokenKind::Char);
            continue;
        }
        if (ident_start(c)) {
            std::size_t j = i;
            while (j < src.size() && ident_char(src[j])) ++j;
            std::string_view word = src.substr(i, j - i);
            if (j < src.size() && (src[j] == '"' || src[j] == '\'') &&
                (word == "L" || word == "u" || word == "U" || word == "u8")) {
                lex_quoted(i, src[j], src[j] == '"' ? TokenKind::String : TokenKind::Char);
                continue;
            }
            push(is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, i, j, line);
            i = j;
            continue;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) ||
            (c == '.' && i + 1 < src.size() && std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
            std::size_t j = i + 1;
            while (j < src.size()) {
                char d = src[j];
                if (ident_char(d) || d == '.' || (d == '\'' && j + 1 < src.size() &&
                                                  std::isalnum(static_cast<unsigned char>(src[j + 1])))) {
                    ++j;
                } else if ((d == '+' || d == '-') &&
                           (src[j - 1] == 'e' || src[j - 1] == 'E' || src[j - 1] == 'p' || src[j - 1] == 'P')) {
                    ++j;
                } else {
                    break;
                }
            }
            push(TokenKind::Number, i, j, line);
            i = j;
            continue;
        }
        std::size_t len = 1;
        for (std::string_view p : kMultiPunct) {
            if (src.substr(i, p.size()) == p) {
                len = p.size();
                break;
            }
        }
        push(TokenKind::Punct, i, i + len, line);
        i += len;
    }
    return out;
}

std::vector<Token> significant_tokens(std::string_view source) {
    std::vector<Token> all = lex(source);
    std::vector<Token> out;
    out.reserve(all.size());
    for (auto& t : all)
        if (t.kind != TokenKind::Comment && t.kind != TokenKind::Preprocessor) out.push_back(std::move(t));
    return out;
}

} // namespace vulninstruct
