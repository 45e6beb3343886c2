#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

namespace vulninstruct {

enum class TokenKind { Identifier, Keyword, Number, String, Char, Punct, Comment, Preprocessor };

struct Token {
    TokenKind kind;
    std::string text;
    std::size_t offset = 0; // byte offset into the lexed source
    int line = 1;           // 1-based line of the first byte

    std::size_t end() const { return offset + text.size(); }
    bool is(std::string_view punct) const { return kind == TokenKind::Punct && text == punct; }
    bool is_ident() const { return kind == TokenKind::Identifier; }
    bool is_keyword(std::string_view kw) const { return kind == TokenKind::Keyword && text == kw; }
};

// Lexes C/C++ source. Comments and preprocessor lines are kept as tokens so
// that byte offsets stay usable for splicing. Throws LexError on an
// unterminated string, character literal or block comment.
std::vector<Token> lex(std::string_view source);

// Tokens other than comments and preprocessor lines.
std::vector<Token> significant_tokens(std::string_view source);

bool is_keyword(std::string_view word);
bool is_valid_identifier(std::string_view word);

// Identifier spellings treated as type names (never tracked as variables).
struct TypeNames {
    std::unordered_set<std::string> names;
    bool suffix_t_is_type = true; // foo_t style typedefs

    bool contains(std::string_view word) const;
    static const TypeNames& defaults();
};

} // namespace vulninstruct
