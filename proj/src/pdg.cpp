#include "vulninstruct/pdg.hpp"

#include "vulninstruct/errors.hpp"
#include "vulninstruct/util.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <unordered_set>

namespace vulninstruct {

std::string_view to_string(StatementKind kind) {
    switch (kind) {
    case StatementKind::Declaration: return "declaration";
    case StatementKind::Assignment: return "assignment";
    case StatementKind::Call: return "call";
    case StatementKind::Control: return "control";
    case StatementKind::Return: return "return";
    case StatementKind::Other: return "other";
    }
    return "other";
}

namespace {

constexpr std::size_t npos = static_cast<std::size_t>(-1);

using Tokens = std::vector<Token>;

bool is_open(const Token& t) { return t.is("(") || t.is("[") || t.is("{"); }
bool is_close(const Token& t) { return t.is(")") || t.is("]") || t.is("}"); }

bool is_assign_op(const Token& t) {
    static const std::unordered_set<std::string> ops = {"=",  "+=", "-=", "*=",  "/=",  "%=",
                                                        "&=", "|=", "^=", "<<=", ">>="};
    return t.kind == TokenKind::Punct && ops.count(t.text) > 0;
}

bool is_decl_keyword(const Token& t) {
    static const std::unordered_set<std::string> kws = {
        "int",      "char",     "short",  "long",     "float",    "double",  "signed",
        "unsigned", "void",     "const",  "volatile", "static",   "extern",  "register",
        "auto",     "struct",   "union",  "enum",     "_Bool",    "bool",    "inline",
        "typedef",  "restrict", "wchar_t", "char16_t", "char32_t", "char8_t", "__const"};
    return t.kind == TokenKind::Keyword && kws.count(t.text) > 0;
}

bool is_tag_keyword(const Token& t) {
    return t.kind == TokenKind::Keyword && (t.text == "struct" || t.text == "union" || t.text == "enum");
}

// Index of the token closing the bracket opened at `open`.
std::size_t find_match(const Tokens& t, std::size_t open, std::size_t end) {
    int depth = 0;
    for (std::size_t i = open; i < end; ++i) {
        if (is_open(t[i])) ++depth;
        else if (is_close(t[i])) {
            --depth;
            if (depth == 0) return i;
        }
    }
    throw SegmentError("unbalanced brackets starting at line " + std::to_string(t[open].line));
}

class Analyzer {
public:
    Analyzer(const Tokens& t, const TypeNames& types) : t_(t), types_(types) {}

    // An identifier that names a variable: not a type, member, tag, call
    // target or qualified name component.
    bool tracked(std::size_t i, std::size_t b, std::size_t e) const {
        const Token& tok = t_[i];
        if (tok.kind != TokenKind::Identifier || types_.contains(tok.text)) return false;
        if (i > b) {
            const Token& prev = t_[i - 1];
            if (prev.is(".") || prev.is("->") || prev.is("::") || is_tag_keyword(prev)) return false;
        }
        if (i + 1 < e && (t_[i + 1].is("(") || t_[i + 1].is("::"))) return false;
        // (Type *) cast
        if (i > b && t_[i - 1].is("(")) {
            std::size_t j = i + 1;
            bool star = false;
            while (j < e && t_[j].is("*")) {
                star = true;
                ++j;
            }
            if (star && j < e && t_[j].is(")")) return false;
        }
        return true;
    }

    std::size_t first_tracked(std::size_t b, std::size_t e) const {
        for (std::size_t i = b; i < e; ++i)
            if (tracked(i, b, e)) return i;
        return npos;
    }

    // Base variable of the postfix expression ending just before `op`.
    std::size_t base_before(std::size_t b, std::size_t op, std::size_t e) const {
        if (op == b) return npos;
        std::size_t j = op - 1;
        while (true) {
            const Token& tok = t_[j];
            if (tok.is("]") || tok.is(")")) {
                int depth = 0;
                std::size_t k = j;
                while (true) {
                    if (is_close(t_[k])) ++depth;
                    else if (is_open(t_[k]) && --depth == 0) break;
                    if (k == b) return npos;
                    --k;
                }
                if (tok.is(")")) {
                    // (*p)++ or (p)->x++: the base lives inside the parentheses
                    if (k == b || !(t_[k - 1].kind == TokenKind::Identifier)) return first_tracked(k + 1, j);
                }
                if (k == b) return npos;
                j = k - 1;
                continue;
            }
            if (tok.kind == TokenKind::Identifier) {
                if (j >= b + 2 && (t_[j - 1].is(".") || t_[j - 1].is("->"))) {
                    j -= 2;
                    continue;
                }
                return tracked(j, b, e) ? j : npos;
            }
            return npos;
        }
    }

    void expression(std::size_t b, std::size_t e, DefUse& du) const {
        std::vector<bool> skip(e - b, false);
        int depth = 0;
        std::size_t seg = b;
        for (std::size_t i = b; i < e; ++i) {
            if (is_open(t_[i])) ++depth;
            else if (is_close(t_[i])) --depth;
            else if (depth == 0 && is_assign_op(t_[i])) {
                std::size_t base = first_tracked(seg, i);
                if (base != npos) {
                    du.defs.insert(t_[base].text);
                    if (t_[i].text == "=") skip[base - b] = true;
                }
                seg = i + 1;
            }
        }
        // Nested assignments inside parentheses, e.g. if ((n = read(fd)) < 0).
        for (std::size_t i = b; i < e; ++i) {
            if (!is_assign_op(t_[i])) continue;
            std::size_t k = i;
            std::size_t open = npos;
            int d = 0;
            while (k > b) {
                --k;
                if (is_close(t_[k])) ++d;
                else if (is_open(t_[k])) {
                    if (d == 0) {
                        open = k;
                        break;
                    }
                    --d;
                }
            }
            if (open == npos) continue; // top level, handled above
            std::size_t lhs_begin = open + 1;
            // the left operand starts after the last ',' at this nesting level
            for (std::size_t m = open + 1; m < i; ++m) {
                if (is_open(t_[m])) {
                    m = find_match(t_, m, e);
                    continue;
                }
                if (t_[m].is(",")) lhs_begin = m + 1;
            }
            std::size_t base = first_tracked(lhs_begin, i);
            if (base != npos) {
                du.defs.insert(t_[base].text);
                if (t_[i].text == "=") skip[base - b] = true;
            }
        }
        for (std::size_t i = b; i < e; ++i) {
            if (!(t_[i].is("++") || t_[i].is("--"))) continue;
            std::size_t idx = npos;
            if (i + 1 < e && tracked(i + 1, b, e)) idx = i + 1;
            else idx = base_before(b, i, e);
            if (idx != npos) du.defs.insert(t_[idx].text);
        }
        for (std::size_t i = b; i < e; ++i)
            if (!skip[i - b] && tracked(i, b, e)) du.uses.insert(t_[i].text);
    }

    bool is_declaration(std::size_t b, std::size_t e) const {
        if (b >= e) return false;
        const Token& t0 = t_[b];
        if (is_decl_keyword(t0)) return true;
        if (t0.kind != TokenKind::Identifier || b + 1 >= e) return false;
        const Token& t1 = t_[b + 1];
        if (types_.contains(t0.text))
            return t1.kind == TokenKind::Identifier || t1.is("*") || t1.is("&") || is_decl_keyword(t1);
        if (t1.kind == TokenKind::Identifier) return true;
        if (t1.is("*")) {
            std::size_t j = b + 1;
            while (j < e && (t_[j].is("*") || is_decl_keyword(t_[j]))) ++j;
            if (j >= e || t_[j].kind != TokenKind::Identifier) return false;
            ++j;
            return j >= e || t_[j].is("=") || t_[j].is(";") || t_[j].is(",") || t_[j].is("[") || t_[j].is(")");
        }
        return false;
    }

    void declaration(std::size_t b, std::size_t e, DefUse& du) const {
        std::size_t seg = b;
        int depth = 0;
        for (std::size_t i = b; i <= e; ++i) {
            bool boundary = i == e;
            if (!boundary) {
                if (is_open(t_[i])) ++depth;
                else if (is_close(t_[i])) --depth;
                else if (depth == 0 && t_[i].is(",")) boundary = true;
            }
            if (!boundary) continue;
            declarator(seg, i, du);
            seg = i + 1;
        }
    }

    void declarator(std::size_t b, std::size_t e, DefUse& du) const {
        std::size_t eq = npos;
        int depth = 0;
        for (std::size_t i = b; i < e; ++i) {
            if (is_open(t_[i])) ++depth;
            else if (is_close(t_[i])) --depth;
            else if (depth == 0 && t_[i].is("=")) {
                eq = i;
                break;
            }
        }
        const std::size_t decl_end = eq == npos ? e : eq;
        std::size_t name = npos;
        depth = 0;
        for (std::size_t i = b; i < decl_end; ++i) {
            if (is_open(t_[i])) ++depth;
            else if (is_close(t_[i])) --depth;
            else if (depth == 0 && t_[i].kind == TokenKind::Identifier && !types_.contains(t_[i].text) &&
                     !(i > b && is_tag_keyword(t_[i - 1])))
                name = i;
        }
        if (name == npos) {
            // function pointer declarator such as (*handler)(int)
            for (std::size_t i = b; i < decl_end; ++i) {
                if (t_[i].kind == TokenKind::Identifier && !types_.contains(t_[i].text) &&
                    !(i > b && is_tag_keyword(t_[i - 1]))) {
                    name = i;
                    break;
                }
            }
        }
        if (name != npos) {
            du.defs.insert(t_[name].text);
            du.declared.insert(t_[name].text);
        }
        // array bounds and constructor arguments in the declarator part
        depth = 0;
        for (std::size_t i = b; i < decl_end; ++i) {
            if (is_open(t_[i])) ++depth;
            else if (is_close(t_[i])) --depth;
            else if (depth > 0 && i != name && tracked(i, b, decl_end)) du.uses.insert(t_[i].text);
        }
        if (eq != npos) expression(eq + 1, e, du);
    }

private:
    const Tokens& t_;
    const TypeNames& types_;
};

std::string collapse_ws(std::string_view s) {
    std::string out;
    bool space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            space = true;
            continue;
        }
        if (space && !out.empty()) out.push_back(' ');
        space = false;
        out.push_back(c);
    }
    return out;
}

class Segmenter {
public:
    Segmenter(std::string_view code, const TypeNames& types)
        : code_(code), lines_(split_lines(code)), t_(significant_tokens(code)), an_(t_, types) {}

    std::vector<Statement> run() {
        sequence(std::nullopt, false);
        return std::move(out_);
    }

private:
    std::string_view code_;
    std::vector<std::string> lines_;
    Tokens t_;
    Analyzer an_;
    std::size_t pos_ = 0;
    int brace_depth_ = 0;
    std::vector<Statement> out_;

    std::size_t n() const { return t_.size(); }

    int emit(std::size_t b, std::size_t e, StatementKind kind, std::optional<int> parent, DefUse du) {
        Statement s;
        s.index = static_cast<int>(out_.size());
        s.line_no = t_[b].line;
        const Token& last = t_[e - 1];
        s.end_line = last.line + static_cast<int>(std::count(last.text.begin(), last.text.end(), '\n'));
        s.text = collapse_ws(code_.substr(t_[b].offset, last.end() - t_[b].offset));
        if (s.line_no >= 1 && s.line_no <= static_cast<int>(lines_.size())) s.head_line = trim(lines_[s.line_no - 1]);
        s.kind = kind;
        s.defs = std::move(du.defs);
        s.uses = std::move(du.uses);
        s.declared = std::move(du.declared);
        s.control_parent = parent;
        out_.push_back(std::move(s));
        return out_.back().index;
    }

    void expect_close_brace() {
        if (pos_ >= n() || !t_[pos_].is("}")) throw SegmentError("unbalanced braces: missing '}'");
        ++pos_;
        --brace_depth_;
    }

    void sequence(std::optional<int> parent, bool in_block) {
        while (pos_ < n()) {
            if (t_[pos_].is("}")) {
                if (in_block) return;
                throw SegmentError("unbalanced braces: unexpected '}' at line " + std::to_string(t_[pos_].line));
            }
            item(parent);
        }
        if (in_block) throw SegmentError("unbalanced braces: missing '}'");
    }

    void body(int owner) {
        if (pos_ >= n()) throw SegmentError("control statement without a body");
        if (t_[pos_].is("{")) {
            ++pos_;
            ++brace_depth_;
            sequence(owner, true);
            expect_close_brace();
        } else {
            item(owner);
        }
    }

    // Index of the next ';' at bracket depth 0, or n() when missing.
    std::size_t find_semicolon(std::size_t from) const {
        int depth = 0;
        for (std::size_t i = from; i < n(); ++i) {
            if (is_open(t_[i])) ++depth;
            else if (is_close(t_[i])) {
                if (depth == 0) return i; // statement ends at the enclosing '}'
                --depth;
            } else if (depth == 0 && t_[i].is(";")) return i;
        }
        if (depth != 0) throw SegmentError("unbalanced brackets");
        return n();
    }

    void item(std::optional<int> parent) {
        const Token& tok = t_[pos_];
        if (tok.is("{")) {
            ++pos_;
            ++brace_depth_;
            sequence(parent, true);
            expect_close_brace();
            return;
        }
        if (tok.is(";")) {
            ++pos_;
            return;
        }
        if (tok.kind == TokenKind::Keyword) {
            const std::string& kw = tok.text;
            if (kw == "if" || kw == "while" || kw == "for" || kw == "switch") {
                control(parent);
                return;
            }
            if (kw == "do") {
                do_while(parent);
                return;
            }
            if (kw == "else") throw SegmentError("'else' without 'if' at line " + std::to_string(tok.line));
            if (kw == "case") {
                std::size_t colon = pos_ + 1;
                int ternary = 0;
                for (; colon < n(); ++colon) {
                    if (t_[colon].is("?")) ++ternary;
                    else if (t_[colon].is(":")) {
                        if (ternary == 0) break;
                        --ternary;
                    }
                }
                if (colon >= n()) throw SegmentError("case label without ':'");
                DefUse du;
                an_.expression(pos_ + 1, colon, du);
                emit(pos_, colon + 1, StatementKind::Other, parent, std::move(du));
                pos_ = colon + 1;
                return;
            }
            if (kw == "default" && pos_ + 1 < n() && t_[pos_ + 1].is(":")) {
                emit(pos_, pos_ + 2, StatementKind::Other, parent, {});
                pos_ += 2;
                return;
            }
            if (kw == "return") {
                std::size_t semi = find_semicolon(pos_ + 1);
                DefUse du;
                an_.expression(pos_ + 1, semi, du);
                std::size_t end = semi < n() && t_[semi].is(";") ? semi + 1 : semi;
                emit(pos_, std::max(end, pos_ + 1), StatementKind::Return, parent, std::move(du));
                pos_ = std::max(end, pos_ + 1);
                return;
            }
            if (kw == "break" || kw == "continue" || kw == "goto") {
                std::size_t semi = find_semicolon(pos_ + 1);
                std::size_t end = semi < n() && t_[semi].is(";") ? semi + 1 : semi;
                emit(pos_, std::max(end, pos_ + 1), StatementKind::Other, parent, {});
                pos_ = std::max(end, pos_ + 1);
                return;
            }
        }
        if (tok.kind == TokenKind::Identifier && pos_ + 1 < n() && t_[pos_ + 1].is(":")) {
            emit(pos_, pos_ + 2, StatementKind::Other, parent, {}); // goto label
            pos_ += 2;
            return;
        }
        simple(parent);
    }

    void control(std::optional<int> parent) {
        const std::size_t kw = pos_;
        if (kw + 1 >= n() || !t_[kw + 1].is("("))
            throw SegmentError("expected '(' after '" + t_[kw].text + "' at line " + std::to_string(t_[kw].line));
        const std::size_t close = find_match(t_, kw + 1, n());
        DefUse du;
        if (t_[kw].text == "for") {
            std::vector<std::size_t> semis;
            int depth = 0;
            for (std::size_t i = kw + 2; i < close; ++i) {
                if (is_open(t_[i])) ++depth;
                else if (is_close(t_[i])) --depth;
                else if (depth == 0 && t_[i].is(";")) semis.push_back(i);
            }
            if (semis.size() == 2) {
                if (an_.is_declaration(kw + 2, semis[0])) an_.declaration(kw + 2, semis[0], du);
                else an_.expression(kw + 2, semis[0], du);
                an_.expression(semis[0] + 1, semis[1], du);
                an_.expression(semis[1] + 1, close, du);
            } else {
                an_.expression(kw + 2, close, du); // range-for or macro-mangled header
            }
        } else {
            an_.expression(kw + 2, close, du);
        }
        const int idx = emit(kw, close + 1, StatementKind::Control, parent, std::move(du));
        pos_ = close + 1;
        body(idx);
        if (t_[kw].text == "if" && pos_ < n() && t_[pos_].is_keyword("else")) {
            ++pos_;
            if (pos_ < n() && t_[pos_].is_keyword("if")) control(idx);
            else body(idx);
        }
    }

    void do_while(std::optional<int> parent) {
        const int idx = emit(pos_, pos_ + 1, StatementKind::Control, parent, {});
        ++pos_;
        body(idx);
        if (pos_ >= n() || !t_[pos_].is_keyword("while") || pos_ + 1 >= n() || !t_[pos_ + 1].is("("))
            throw SegmentError("'do' without matching 'while'");
        const std::size_t close = find_match(t_, pos_ + 1, n());
        DefUse du;
        an_.expression(pos_ + 2, close, du);
        out_[idx].uses.insert(du.uses.begin(), du.uses.end());
        out_[idx].defs.insert(du.defs.begin(), du.defs.end());
        pos_ = close + 1;
        if (pos_ < n() && t_[pos_].is(";")) ++pos_;
    }

    void simple(std::optional<int> parent) {
        const std::size_t start = pos_;
        int depth = 0;
        while (pos_ < n()) {
            const Token& tok = t_[pos_];
            if (tok.is("(") || tok.is("[")) ++depth;
            else if (tok.is(")") || tok.is("]")) {
                if (--depth < 0) throw SegmentError("unbalanced parentheses at line " + std::to_string(tok.line));
            } else if (depth == 0) {
                if (tok.is(";")) {
                    finish_simple(start, pos_, parent);
                    ++pos_;
                    return;
                }
                if (tok.is("}")) {
                    finish_simple(start, pos_, parent);
                    return;
                }
                if (tok.is("{")) {
                    if (pos_ > start && t_[pos_ - 1].is(")")) {
                        if (!parent && brace_depth_ == 0) function_definition(start, pos_);
                        else macro_block(start, pos_, parent);
                        return;
                    }
                    pos_ = find_match(t_, pos_, n()); // aggregate initializer or struct body
                }
            }
            ++pos_;
        }
        if (depth != 0) throw SegmentError("unbalanced parentheses");
        if (pos_ > start) finish_simple(start, pos_, parent);
    }

    void finish_simple(std::size_t b, std::size_t e, std::optional<int> parent) {
        if (e <= b) return;
        DefUse du;
        StatementKind kind;
        if (an_.is_declaration(b, e)) {
            an_.declaration(b, e, du);
            kind = StatementKind::Declaration;
        } else {
            an_.expression(b, e, du);
            bool assigns = false, calls = false;
            int depth = 0;
            for (std::size_t i = b; i < e; ++i) {
                if (is_open(t_[i])) ++depth;
                else if (is_close(t_[i])) --depth;
                if ((depth == 0 && is_assign_op(t_[i])) || t_[i].is("++") || t_[i].is("--")) assigns = true;
                if (t_[i].kind == TokenKind::Identifier && i + 1 < e && t_[i + 1].is("(")) calls = true;
            }
            kind = assigns ? StatementKind::Assignment : calls ? StatementKind::Call : StatementKind::Other;
        }
        const std::size_t end = e < n() && t_[e].is(";") ? e + 1 : e;
        emit(b, end, kind, parent, std::move(du));
    }

    void function_definition(std::size_t b, std::size_t brace) {
        // parameter list: the last top-level parenthesis group before '{'
        std::size_t close = brace - 1;
        std::size_t open = close;
        int depth = 0;
        while (true) {
            if (is_close(t_[open])) ++depth;
            else if (is_open(t_[open]) && --depth == 0) break;
            if (open == b) throw SegmentError("malformed function header");
            --open;
        }
        DefUse du;
        std::size_t seg = open + 1;
        depth = 0;
        for (std::size_t i = open + 1; i <= close; ++i) {
            bool boundary = i == close;
            if (!boundary) {
                if (is_open(t_[i])) ++depth;
                else if (is_close(t_[i])) --depth;
                else if (depth == 0 && t_[i].is(",")) boundary = true;
            }
            if (!boundary) continue;
            DefUse param;
            if (seg < i) an_.declarator(seg, i, param);
            du.defs.insert(param.declared.begin(), param.declared.end());
            du.declared.insert(param.declared.begin(), param.declared.end());
            seg = i + 1;
        }
        emit(b, brace, StatementKind::Declaration, std::nullopt, std::move(du));
        pos_ = brace + 1;
        ++brace_depth_;
        sequence(std::nullopt, true);
        expect_close_brace();
    }

    // Iteration macros such as list_for_each_entry(pos, head, member) { ... }
    void macro_block(std::size_t b, std::size_t brace, std::optional<int> parent) {
        DefUse du;
        an_.expression(b, brace, du);
        const int idx = emit(b, brace, StatementKind::Control, parent, std::move(du));
        pos_ = brace + 1;
        ++brace_depth_;
        sequence(idx, true);
        expect_close_brace();
    }
};

} // namespace

std::vector<Statement> segment_statements(std::string_view code, const TypeNames& types) {
    return Segmenter(code, types).run();
}

DefUse def_use(const std::vector<Token>& tokens, const TypeNames& types) {
    Analyzer an(tokens, types);
    std::size_t e = tokens.size();
    if (e > 0 && tokens[e - 1].is(";")) --e;
    DefUse du;
    if (an.is_declaration(0, e)) an.declaration(0, e, du);
    else an.expression(0, e, du);
    return du;
}

DefUse def_use(std::string_view statement_text, const TypeNames& types) {
    return def_use(significant_tokens(statement_text), types);
}

Pdg build_pdg(std::vector<Statement> statements) {
    Pdg pdg;
    pdg.statements = std::move(statements);
    const auto& st = pdg.statements;
    for (std::size_t b = 0; b < st.size(); ++b) {
        for (const auto& var : st[b].uses) {
            for (std::size_t a = b; a-- > 0;) {
                if (st[a].defs.count(var)) {
                    pdg.edges.push_back({static_cast<int>(a), static_cast<int>(b), EdgeKind::Data});
                    break;
                }
            }
        }
        if (st[b].control_parent)
            pdg.edges.push_back({*st[b].control_parent, static_cast<int>(b), EdgeKind::Control});
    }
    std::sort(pdg.edges.begin(), pdg.edges.end());
    pdg.edges.erase(std::unique(pdg.edges.begin(), pdg.edges.end()), pdg.edges.end());
    return pdg;
}

VulnContext k_hop_context(const Pdg& pdg, const std::vector<int>& vuln_lines, int k) {
    if (vuln_lines.empty()) throw Error("k_hop_context requires at least one vulnerability line");
    if (k < 0) throw Error("k must be non-negative");
    const auto& st = pdg.statements;
    std::vector<std::vector<int>> adj(st.size());
    for (const auto& e : pdg.edges) {
        adj[e.src].push_back(e.dst);
        adj[e.dst].push_back(e.src);
    }

    VulnContext ctx;
    ctx.k = k;
    std::vector<int> dist(st.size(), -1);
    std::deque<int> queue;
    const std::set<int> vset(vuln_lines.begin(), vuln_lines.end());
    for (int line : vset) {
        bool mapped = false;
        for (const auto& s : st) {
            if (line >= s.line_no && line <= s.end_line) {
                mapped = true;
                if (dist[s.index] < 0) {
                    dist[s.index] = 0;
                    queue.push_back(s.index);
                }
            }
        }
        if (!mapped) ctx.unmapped_lines.push_back(line);
    }
    while (!queue.empty()) {
        int u = queue.front();
        queue.pop_front();
        if (dist[u] == k) continue;
        for (int v : adj[u]) {
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    std::map<int, std::string> lines;
    for (const auto& s : st)
        if (dist[s.index] > 0 && !vset.count(s.line_no)) lines.emplace(s.line_no, s.head_line);
    for (auto& [line, text] : lines) ctx.context_lines.push_back({line, text});
    return ctx;
}

nlohmann::json pdg_to_json(const Pdg& pdg) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& s : pdg.statements)
        nodes.push_back({{"index", s.index}, {"line", s.line_no}, {"text", s.text}, {"kind", to_string(s.kind)}});
    nlohmann::json edges = nlohmann::json::array();
    for (const auto& e : pdg.edges)
        edges.push_back({{"src", e.src}, {"dst", e.dst}, {"kind", e.kind == EdgeKind::Data ? "Data" : "Control"}});
    return {{"nodes", nodes}, {"edges", edges}};
}

} // namespace vulninstruct
