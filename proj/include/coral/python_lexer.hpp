#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

#include "coral/common.hpp"

namespace coral::py {

enum class TokKind {
    Name,      // identifiers and keywords
    Number,
    String,    // any string literal (prefixes included)
    Op,        // operators and delimiters
    Newline,   // end of a logical line
    Indent,
    Dedent,
    End,
};

struct Token {
    TokKind kind;
    std::string text;
    int line = 0;
    int col = 0;

    bool is(TokKind k) const { return kind == k; }
    bool is_op(std::string_view s) const { return kind == TokKind::Op && text == s; }
    bool is_name(std::string_view s) const { return kind == TokKind::Name && text == s; }
};

inline bool is_python_keyword(std::string_view s) {
    static const char* kw[] = {
        "False", "None",   "True",  "and",      "as",     "assert", "async",
        "await", "break",  "class", "continue", "def",    "del",    "elif",
        "else",  "except", "finally", "for",    "from",   "global", "if",
        "import", "in",    "is",    "lambda",   "nonlocal", "not",  "or",
        "pass",  "raise",  "return", "try",     "while",  "with",   "yield"};
    for (const char* k : kw) {
        if (s == k) return true;
    }
    return false;
}

// Tokenizer for the notebook kernel language (Python 3 reference grammar).
// Produces NEWLINE/INDENT/DEDENT structure like the reference tokenizer;
// blank and comment-only lines vanish. Anything outside the grammar (shell
// escapes, magics, stray '?') raises ParseError, which marks the cell
// unparseable upstream.
class Lexer {
public:
    explicit Lexer(std::string_view src) : src_(src) {}

    std::vector<Token> tokenize() {
        std::vector<Token> out;
        indents_.assign(1, 0);
        pos_ = 0;
        line_ = 1;
        bool at_line_start = true;
        int paren_depth = 0;
        bool line_has_tokens = false;

        while (true) {
            if (at_line_start && paren_depth == 0) {
                int indent = consume_indent();
                if (pos_ >= src_.size()) break;
                char c = src_[pos_];
                if (c == '\n') {  // blank line
                    advance_newline();
                    continue;
                }
                if (c == '\r') {
                    ++pos_;
                    continue;
                }
                if (c == '#') {
                    skip_comment();
                    continue;
                }
                emit_indentation(out, indent);
                at_line_start = false;
                line_has_tokens = false;
                continue;
            }
            if (pos_ >= src_.size()) {
                if (line_has_tokens) out.push_back(make(TokKind::Newline, ""));
                break;
            }
            char c = src_[pos_];
            if (c == '\n') {
                if (paren_depth > 0) {
                    advance_newline();
                    continue;
                }
                advance_newline();
                out.push_back(make(TokKind::Newline, ""));
                at_line_start = true;
                line_has_tokens = false;
                continue;
            }
            if (c == ' ' || c == '\t' || c == '\r' || c == '\f') {
                ++pos_;
                continue;
            }
            if (c == '#') {
                skip_comment();
                continue;
            }
            if (c == '\\' && pos_ + 1 < src_.size() && peek_past_cr(pos_ + 1) == '\n') {
                pos_ = skip_escaped_newline(pos_ + 1);
                ++line_;
                continue;
            }
            line_has_tokens = true;
            if (is_ident_start(c)) {
                out.push_back(lex_name_or_string_prefix());
                continue;
            }
            if (std::isdigit(static_cast<unsigned char>(c)) ||
                (c == '.' && pos_ + 1 < src_.size() &&
                 std::isdigit(static_cast<unsigned char>(src_[pos_ + 1])))) {
                out.push_back(lex_number());
                continue;
            }
            if (c == '"' || c == '\'') {
                out.push_back(lex_string(pos_));
                continue;
            }
            Token op = lex_operator();
            if (op.text == "(" || op.text == "[" || op.text == "{") ++paren_depth;
            if (op.text == ")" || op.text == "]" || op.text == "}") {
                if (paren_depth == 0) fail("unmatched '" + op.text + "'");
                --paren_depth;
            }
            out.push_back(std::move(op));
        }

        while (indents_.size() > 1) {
            indents_.pop_back();
            out.push_back(make(TokKind::Dedent, ""));
        }
        out.push_back(make(TokKind::End, ""));
        return out;
    }

private:
    std::string_view src_;
    size_t pos_ = 0;
    int line_ = 1;
    std::vector<int> indents_;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg + " at line " + std::to_string(line_), line_, 0);
    }

    Token make(TokKind k, std::string text) const { return Token{k, std::move(text), line_, 0}; }

    static bool is_ident_start(char c) {
        unsigned char u = static_cast<unsigned char>(c);
        return std::isalpha(u) || c == '_' || u >= 0x80;
    }
    static bool is_ident_cont(char c) {
        unsigned char u = static_cast<unsigned char>(c);
        return std::isalnum(u) || c == '_' || u >= 0x80;
    }

    void advance_newline() {
        ++pos_;
        ++line_;
    }

    char peek_past_cr(size_t p) const {
        if (p < src_.size() && src_[p] == '\r' && p + 1 < src_.size()) return src_[p + 1];
        return p < src_.size() ? src_[p] : '\0';
    }

    size_t skip_escaped_newline(size_t p) const {
        if (p < src_.size() && src_[p] == '\r') ++p;
        return p + 1;  // past '\n'
    }

    void skip_comment() {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
    }

    // Tab advances to the next multiple of 8, like the reference tokenizer.
    int consume_indent() {
        int col = 0;
        while (pos_ < src_.size()) {
            char c = src_[pos_];
            if (c == ' ') {
                ++col;
                ++pos_;
            } else if (c == '\t') {
                col = (col / 8 + 1) * 8;
                ++pos_;
            } else {
                break;
            }
        }
        return col;
    }

    void emit_indentation(std::vector<Token>& out, int indent) {
        if (indent > indents_.back()) {
            indents_.push_back(indent);
            out.push_back(make(TokKind::Indent, ""));
            return;
        }
        while (indent < indents_.back()) {
            indents_.pop_back();
            out.push_back(make(TokKind::Dedent, ""));
        }
        if (indent != indents_.back()) fail("unindent does not match any outer indentation level");
    }

    Token lex_name_or_string_prefix() {
        size_t start = pos_;
        while (pos_ < src_.size() && is_ident_cont(src_[pos_])) ++pos_;
        std::string word(src_.substr(start, pos_ - start));
        // string prefixes: r, b, u, f and two-letter combos, any case
        if (word.size() <= 2 && pos_ < src_.size() && (src_[pos_] == '"' || src_[pos_] == '\'')) {
            bool prefix_ok = true;
            for (char c : word) {
                char l = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
                if (l != 'r' && l != 'b' && l != 'u' && l != 'f') prefix_ok = false;
            }
            if (prefix_ok) return lex_string(start);
        }
        return Token{TokKind::Name, std::move(word), line_, 0};
    }

    Token lex_number() {
        size_t start = pos_;
        auto take_digits = [&](auto pred) {
            while (pos_ < src_.size() &&
                   (pred(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
                ++pos_;
        };
        if (src_[pos_] == '0' && pos_ + 1 < src_.size() &&
            (src_[pos_ + 1] == 'x' || src_[pos_ + 1] == 'X' || src_[pos_ + 1] == 'o' ||
             src_[pos_ + 1] == 'O' || src_[pos_ + 1] == 'b' || src_[pos_ + 1] == 'B')) {
            pos_ += 2;
            take_digits([](unsigned char c) { return std::isxdigit(c); });
        } else {
            take_digits([](unsigned char c) { return std::isdigit(c); });
            if (pos_ < src_.size() && src_[pos_] == '.') {
                ++pos_;
                take_digits([](unsigned char c) { return std::isdigit(c); });
            }
            if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
                size_t mark = pos_;
                ++pos_;
                if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
                if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                    take_digits([](unsigned char c) { return std::isdigit(c); });
                } else {
                    pos_ = mark;  // not an exponent, e.g. `1 .e` or `2eggs` -> let parser complain
                }
            }
        }
        if (pos_ < src_.size() && (src_[pos_] == 'j' || src_[pos_] == 'J')) ++pos_;
        return Token{TokKind::Number, std::string(src_.substr(start, pos_ - start)), line_, 0};
    }

    // `start` points at the first prefix char (or the quote itself).
    Token lex_string(size_t start) {
        // pos_ may sit past the prefix; find the quote
        size_t q = start;
        while (q < src_.size() && src_[q] != '"' && src_[q] != '\'') ++q;
        if (q >= src_.size()) fail("unterminated string");
        char quote = src_[q];
        bool triple = (q + 2 < src_.size() && src_[q + 1] == quote && src_[q + 2] == quote);
        size_t p = q + (triple ? 3 : 1);
        while (p < src_.size()) {
            char c = src_[p];
            if (c == '\\') {
                if (p + 1 < src_.size() && src_[p + 1] == '\n') ++line_;
                p += 2;
                continue;
            }
            if (triple) {
                if (c == quote && p + 2 < src_.size() && src_[p + 1] == quote &&
                    src_[p + 2] == quote) {
                    p += 3;
                    pos_ = p;
                    return Token{TokKind::String, std::string(src_.substr(start, p - start)), line_, 0};
                }
                if (c == '\n') ++line_;
                ++p;
                continue;
            }
            if (c == quote) {
                ++p;
                pos_ = p;
                return Token{TokKind::String, std::string(src_.substr(start, p - start)), line_, 0};
            }
            if (c == '\n') fail("EOL while scanning string literal");
            ++p;
        }
        fail("unterminated string");
    }

    Token lex_operator() {
        static const char* three[] = {"**=", "//=", ">>=", "<<=", "..."};
        static const char* two[] = {"**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->",
                                    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", ":="};
        static const char* one = "+-*/%@&|^~<>=()[]{},:.;";
        std::string_view rest = src_.substr(pos_);
        for (const char* op : three) {
            if (rest.substr(0, 3) == op) {
                pos_ += 3;
                return Token{TokKind::Op, op, line_, 0};
            }
        }
        for (const char* op : two) {
            if (rest.substr(0, 2) == op) {
                pos_ += 2;
                return Token{TokKind::Op, op, line_, 0};
            }
        }
        char c = src_[pos_];
        for (const char* p = one; *p; ++p) {
            if (*p == c) {
                ++pos_;
                return Token{TokKind::Op, std::string(1, c), line_, 0};
            }
        }
        fail(std::string("invalid character '") + c + "'");
    }
};

inline std::vector<Token> tokenize(std::string_view source) { return Lexer(source).tokenize(); }

}  // namespace coral::py
