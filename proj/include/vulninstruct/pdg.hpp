#pragma once

#include "vulninstruct/lexer.hpp"
#include "vulninstruct/patch.hpp"

#include <nlohmann/json.hpp>

#include <compare>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace vulninstruct {

enum class StatementKind { Declaration, Assignment, Call, Control, Return, Other };

std::string_view to_string(StatementKind kind);

struct Statement {
    int index = 0;
    int line_no = 1;  // head line
    int end_line = 1; // last line spanned by the statement's tokens
    std::string text; // source text with whitespace runs collapsed
    std::string head_line; // trimmed source line at line_no
    StatementKind kind = StatementKind::Other;
    std::set<std::string> defs;
    std::set<std::string> uses;
    std::set<std::string> declared; // names introduced by a declaration (subset of defs)
    std::optional<int> control_parent;
};

enum class EdgeKind { Data, Control };

struct Edge {
    int src = 0;
    int dst = 0;
    EdgeKind kind = EdgeKind::Data;

    auto operator<=>(const Edge&) const = default;
};

struct Pdg {
    std::vector<Statement> statements;
    std::vector<Edge> edges; // sorted, unique
};

// Splits a function (or a bare statement sequence) into logical statements.
// Throws SegmentError on unbalanced braces or parentheses and LexError on an
// unterminated literal or comment.
std::vector<Statement> segment_statements(std::string_view code,
                                          const TypeNames& types = TypeNames::defaults());

struct DefUse {
    std::set<std::string> defs;
    std::set<std::string> uses;
    std::set<std::string> declared;
};

// Definitions and uses of one statement's tokens (no trailing ';' needed).
DefUse def_use(const std::vector<Token>& tokens, const TypeNames& types = TypeNames::defaults());
DefUse def_use(std::string_view statement_text, const TypeNames& types = TypeNames::defaults());

// Data edges from the nearest preceding definer of each used identifier and
// control edges from each statement's control parent.
Pdg build_pdg(std::vector<Statement> statements);

struct VulnContext {
    std::string record_id;
    int k = 1;
    std::vector<VulnLineEntry> context_lines; // ascending by line_no
    std::vector<int> unmapped_lines;          // vulnerability lines with no statement node
};

// Statements within k undirected hops of any statement on a vulnerability
// line, excluding the vulnerability lines themselves. Throws Error when
// vuln_lines is empty.
VulnContext k_hop_context(const Pdg& pdg, const std::vector<int>& vuln_lines, int k = 1);

nlohmann::json pdg_to_json(const Pdg& pdg);

} // namespace vulninstruct
