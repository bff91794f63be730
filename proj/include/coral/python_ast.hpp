#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "coral/common.hpp"
#include "coral/python_lexer.hpp"

namespace coral::py {

// One AST node. `kind` is the syntactic category; `lexeme` carries the
// identifier / attribute name for names, the operator symbol for operator
// nodes, and a kind-tag (never the literal value) for constants. `aux` holds
// secondary bookkeeping (import as-names, async markers) that resolution
// needs but graph labels ignore.
struct AstNode {
    std::string kind;
    std::string lexeme;
    std::string aux;
    int parent = -1;
};

struct AstTree {
    std::vector<AstNode> nodes;  // pre-order, root at 0

    size_t size() const { return nodes.size(); }

    std::vector<std::vector<int>> children() const {
        std::vector<std::vector<int>> out(nodes.size());
        for (size_t i = 1; i < nodes.size(); ++i) out[nodes[i].parent].push_back(static_cast<int>(i));
        return out;
    }

    // Label used for graph/vocabulary purposes: lexeme when present,
    // otherwise the syntactic kind.
    const std::string& label(int i) const {
        return nodes[i].lexeme.empty() ? nodes[i].kind : nodes[i].lexeme;
    }

    // Indented one-node-per-line rendering, for fixture diffing.
    std::string dump() const {
        auto kids = children();
        std::string out;
        dump_rec(0, 0, kids, out);
        return out;
    }

private:
    void dump_rec(int id, int depth, const std::vector<std::vector<int>>& kids,
                  std::string& out) const {
        out.append(static_cast<size_t>(depth) * 2, ' ');
        out += nodes[id].kind;
        if (!nodes[id].lexeme.empty()) {
            out += ' ';
            out += nodes[id].lexeme;
        }
        out += '\n';
        for (int c : kids[id]) dump_rec(c, depth + 1, kids, out);
    }
};

namespace detail {

struct PNode {
    std::string kind;
    std::string lexeme;
    std::string aux;
    std::vector<PNode> kids;

    PNode() = default;
    explicit PNode(std::string k) : kind(std::move(k)) {}
    PNode(std::string k, std::string lex) : kind(std::move(k)), lexeme(std::move(lex)) {}

    PNode& add(PNode child) {
        kids.push_back(std::move(child));
        return kids.back();
    }
};

inline void flatten(const PNode& n, int parent, AstTree& tree) {
    int id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(AstNode{n.kind, n.lexeme, n.aux, parent});
    for (const PNode& k : n.kids) flatten(k, id, tree);
}

// Recursive-descent parser over the token stream. Covers the statement and
// expression grammar found in notebook code; constructs the tree with the
// same shape the reference grammar's AST dump produces for the shared
// constructs (ctx markers dropped, operators folded into their parent node).
class Parser {
public:
    explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

    PNode parse_module() {
        PNode mod("module");
        while (!peek().is(TokKind::End)) {
            if (accept_newline()) continue;
            parse_statement(mod);
        }
        return mod;
    }

private:
    std::vector<Token> toks_;
    size_t pos_ = 0;

    const Token& peek(size_t ahead = 0) const {
        size_t i = pos_ + ahead;
        return i < toks_.size() ? toks_[i] : toks_.back();
    }
    const Token& advance() { return toks_[pos_ < toks_.size() - 1 ? pos_++ : pos_]; }

    [[noreturn]] void fail(const std::string& msg) const {
        const Token& t = peek();
        throw ParseError(msg + " near line " + std::to_string(t.line), t.line, t.col);
    }

    bool accept_op(std::string_view s) {
        if (peek().is_op(s)) {
            advance();
            return true;
        }
        return false;
    }
    void expect_op(std::string_view s) {
        if (!accept_op(s)) fail("expected '" + std::string(s) + "'");
    }
    bool accept_kw(std::string_view s) {
        if (peek().is_name(s) && is_python_keyword(s)) {
            advance();
            return true;
        }
        return false;
    }
    void expect_kw(std::string_view s) {
        if (!accept_kw(s)) fail("expected '" + std::string(s) + "'");
    }
    bool accept_newline() {
        if (peek().is(TokKind::Newline)) {
            advance();
            return true;
        }
        return false;
    }
    void expect_newline() {
        if (!peek().is(TokKind::End) && !accept_newline()) fail("expected end of line");
    }
    bool at_kw(std::string_view s) const { return peek().is_name(s) && is_python_keyword(s); }

    std::string expect_name() {
        if (!peek().is(TokKind::Name) || is_python_keyword(peek().text)) fail("expected identifier");
        return advance().text;
    }

    // ---- statements ----

    void parse_statement(PNode& parent) {
        const Token& t = peek();
        if (t.is(TokKind::Indent)) fail("unexpected indent");
        if (t.is_op("@")) {
            parse_decorated(parent);
            return;
        }
        if (t.is(TokKind::Name) && is_python_keyword(t.text)) {
            const std::string& kw = t.text;
            if (kw == "if") return parse_if(parent);
            if (kw == "while") return parse_while(parent);
            if (kw == "for") return parse_for(parent, false);
            if (kw == "try") return parse_try(parent);
            if (kw == "with") return parse_with(parent, false);
            if (kw == "def") return parse_def(parent, false, {});
            if (kw == "class") return parse_class(parent, {});
            if (kw == "async") {
                advance();
                if (at_kw("def")) return parse_def(parent, true, {});
                if (at_kw("for")) return parse_for(parent, true);
                if (at_kw("with")) return parse_with(parent, true);
                fail("expected def, for, or with after async");
            }
        }
        parse_simple_line(parent);
    }

    void parse_decorated(PNode& parent) {
        std::vector<PNode> decorators;
        while (accept_op("@")) {
            PNode dec("decorator");
            dec.add(parse_namedexpr());
            expect_newline();
            while (accept_newline()) {
            }
            decorators.push_back(std::move(dec));
        }
        bool is_async = false;
        if (at_kw("async")) {
            advance();
            is_async = true;
            if (!at_kw("def")) fail("expected def after async");
        }
        if (at_kw("def")) return parse_def(parent, is_async, std::move(decorators));
        if (at_kw("class")) return parse_class(parent, std::move(decorators));
        fail("expected def or class after decorator");
    }

    void parse_simple_line(PNode& parent) {
        while (true) {
            parse_small_statement(parent);
            if (accept_op(";")) {
                if (peek().is(TokKind::Newline) || peek().is(TokKind::End)) break;
                continue;
            }
            break;
        }
        expect_newline();
    }

    void parse_small_statement(PNode& parent) {
        if (accept_kw("pass")) return (void)parent.add(PNode("pass"));
        if (accept_kw("break")) return (void)parent.add(PNode("break"));
        if (accept_kw("continue")) return (void)parent.add(PNode("continue"));
        if (accept_kw("import")) return parse_import(parent);
        if (accept_kw("from")) return parse_import_from(parent);
        if (accept_kw("del")) {
            PNode& n = parent.add(PNode("delete"));
            n.add(parse_expr());
            while (accept_op(",")) {
                if (stmt_boundary()) break;
                n.add(parse_expr());
            }
            return;
        }
        if (at_kw("global") || at_kw("nonlocal")) {
            PNode n(peek().text == "global" ? "global" : "nonlocal");
            advance();
            n.add(PNode("name", expect_name()));
            while (accept_op(",")) n.add(PNode("name", expect_name()));
            parent.add(std::move(n));
            return;
        }
        if (accept_kw("assert")) {
            PNode& n = parent.add(PNode("assert"));
            n.add(parse_test());
            if (accept_op(",")) n.add(parse_test());
            return;
        }
        if (accept_kw("return")) {
            PNode& n = parent.add(PNode("return"));
            if (!stmt_boundary()) n.add(parse_testlist_star());
            return;
        }
        if (accept_kw("raise")) {
            PNode& n = parent.add(PNode("raise"));
            if (!stmt_boundary()) {
                n.add(parse_test());
                if (accept_kw("from")) n.add(parse_test());
            }
            return;
        }
        if (at_kw("yield")) {
            PNode& n = parent.add(PNode("expression_statement"));
            n.add(parse_yield_expr());
            return;
        }
        parse_expr_statement(parent);
    }

    bool stmt_boundary() const {
        return peek().is(TokKind::Newline) || peek().is(TokKind::End) || peek().is_op(";");
    }

    void parse_import(PNode& parent) {
        PNode& n = parent.add(PNode("import"));
        do {
            std::string dotted = expect_name();
            while (accept_op(".")) dotted += "." + expect_name();
            PNode alias("alias", dotted);
            if (accept_kw("as")) alias.aux = expect_name();
            n.add(std::move(alias));
        } while (accept_op(","));
    }

    void parse_import_from(PNode& parent) {
        std::string module;
        int level = 0;
        while (peek().is_op(".") || peek().is_op("...")) {
            level += peek().is_op("...") ? 3 : 1;
            advance();
        }
        if (peek().is(TokKind::Name) && !is_python_keyword(peek().text)) {
            module = expect_name();
            while (accept_op(".")) module += "." + expect_name();
        } else if (level == 0) {
            fail("expected module name in from-import");
        }
        PNode n("import_from", module);
        n.aux = std::to_string(level);
        expect_kw("import");
        if (accept_op("*")) {
            n.add(PNode("alias", "*"));
            parent.add(std::move(n));
            return;
        }
        bool paren = accept_op("(");
        do {
            if (paren) {
                while (accept_newline()) {
                }
                if (peek().is_op(")")) break;
            }
            PNode alias("alias", expect_name());
            if (accept_kw("as")) alias.aux = expect_name();
            n.add(std::move(alias));
        } while (accept_op(","));
        if (paren) expect_op(")");
        parent.add(std::move(n));
    }

    void parse_expr_statement(PNode& parent) {
        PNode first = parse_testlist_star();
        if (accept_op(":")) {
            PNode n("ann_assignment");
            n.add(std::move(first));
            n.add(parse_test());
            if (accept_op("=")) n.add(parse_value_or_yield());
            parent.add(std::move(n));
            return;
        }
        static const char* augops[] = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                       "&=", "|=", "^=", ">>=", "<<=", "**="};
        for (const char* op : augops) {
            if (peek().is_op(op)) {
                advance();
                PNode n("aug_assignment", op);
                n.add(std::move(first));
                n.add(parse_value_or_yield());
                parent.add(std::move(n));
                return;
            }
        }
        if (peek().is_op("=")) {
            PNode n("assignment");
            n.add(std::move(first));
            while (accept_op("=")) n.add(parse_value_or_yield());
            parent.add(std::move(n));
            return;
        }
        PNode n("expression_statement");
        n.add(std::move(first));
        parent.add(std::move(n));
    }

    PNode parse_value_or_yield() {
        if (at_kw("yield")) return parse_yield_expr();
        return parse_testlist_star();
    }

    PNode parse_yield_expr() {
        expect_kw("yield");
        if (accept_kw("from")) {
            PNode n("yield_from");
            n.add(parse_test());
            return n;
        }
        PNode n("yield");
        if (!stmt_boundary() && !peek().is_op(")") && !peek().is_op("]") && !peek().is_op("}") &&
            !peek().is_op(","))
            n.add(parse_testlist_star());
        return n;
    }

    // ---- compound statements ----

    void parse_suite(PNode& parent) {
        if (accept_newline()) {
            if (!peek().is(TokKind::Indent)) fail("expected an indented block");
            advance();
            while (!peek().is(TokKind::Dedent) && !peek().is(TokKind::End)) {
                if (accept_newline()) continue;
                parse_statement(parent);
            }
            if (peek().is(TokKind::Dedent)) advance();
        } else {
            parse_simple_line(parent);
        }
    }

    void parse_if(PNode& parent) {
        expect_kw("if");
        PNode n("if");
        n.add(parse_namedexpr());
        expect_op(":");
        parse_suite(n);
        if (at_kw("elif")) {
            PNode& els = n.add(PNode("else"));
            advance();
            // rewrite elif as a nested if
            toks_.insert(toks_.begin() + static_cast<long>(pos_), Token{TokKind::Name, "if", peek().line, 0});
            parse_if(els);
        } else if (accept_kw("else")) {
            PNode& els = n.add(PNode("else"));
            expect_op(":");
            parse_suite(els);
        }
        parent.add(std::move(n));
    }

    void parse_while(PNode& parent) {
        expect_kw("while");
        PNode n("while");
        n.add(parse_namedexpr());
        expect_op(":");
        parse_suite(n);
        if (accept_kw("else")) {
            PNode& els = n.add(PNode("else"));
            expect_op(":");
            parse_suite(els);
        }
        parent.add(std::move(n));
    }

    void parse_for(PNode& parent, bool is_async) {
        expect_kw("for");
        PNode n("for");
        if (is_async) n.aux = "async";
        n.add(parse_target_list());
        expect_kw("in");
        n.add(parse_testlist_star());
        expect_op(":");
        parse_suite(n);
        if (accept_kw("else")) {
            PNode& els = n.add(PNode("else"));
            expect_op(":");
            parse_suite(els);
        }
        parent.add(std::move(n));
    }

    void parse_try(PNode& parent) {
        expect_kw("try");
        PNode n("try");
        expect_op(":");
        parse_suite(n);
        while (at_kw("except")) {
            advance();
            PNode handler("except_handler");
            if (!peek().is_op(":")) {
                handler.add(parse_test());
                if (accept_kw("as")) handler.lexeme = expect_name();
            }
            expect_op(":");
            parse_suite(handler);
            n.add(std::move(handler));
        }
        if (accept_kw("else")) {
            PNode& els = n.add(PNode("else"));
            expect_op(":");
            parse_suite(els);
        }
        if (accept_kw("finally")) {
            PNode& fin = n.add(PNode("finally"));
            expect_op(":");
            parse_suite(fin);
        }
        parent.add(std::move(n));
    }

    void parse_with(PNode& parent, bool is_async) {
        expect_kw("with");
        PNode n("with");
        if (is_async) n.aux = "async";
        do {
            PNode item("with_item");
            item.add(parse_test());
            if (accept_kw("as")) item.add(parse_primary_target());
            n.add(std::move(item));
        } while (accept_op(","));
        expect_op(":");
        parse_suite(n);
        parent.add(std::move(n));
    }

    void parse_def(PNode& parent, bool is_async, std::vector<PNode> decorators) {
        expect_kw("def");
        PNode n("function_def", expect_name());
        if (is_async) n.aux = "async";
        for (PNode& d : decorators) n.add(std::move(d));
        expect_op("(");
        n.add(parse_parameters(true));
        expect_op(")");
        if (accept_op("->")) {
            PNode& ann = n.add(PNode("returns"));
            ann.add(parse_test());
        }
        expect_op(":");
        parse_suite(n);
        parent.add(std::move(n));
    }

    void parse_class(PNode& parent, std::vector<PNode> decorators) {
        expect_kw("class");
        PNode n("class_def", expect_name());
        for (PNode& d : decorators) n.add(std::move(d));
        if (accept_op("(")) {
            if (!peek().is_op(")")) parse_call_args(n);
            expect_op(")");
        }
        expect_op(":");
        parse_suite(n);
        parent.add(std::move(n));
    }

    // def and lambda parameter lists; annotations only for def.
    PNode parse_parameters(bool allow_annotations) {
        PNode params("arguments");
        bool done = false;
        while (!done) {
            const Token& t = peek();
            if (t.is_op(")") || t.is_op(":") || t.is(TokKind::Newline)) break;
            if (accept_op("*")) {
                PNode star("vararg");
                if (peek().is(TokKind::Name) && !is_python_keyword(peek().text)) {
                    star.lexeme = expect_name();
                    if (allow_annotations && accept_op(":")) star.add(parse_test());
                }
                params.add(std::move(star));
            } else if (accept_op("**")) {
                PNode kw("kwarg", expect_name());
                if (allow_annotations && accept_op(":")) kw.add(parse_test());
                params.add(std::move(kw));
            } else if (accept_op("/")) {
                params.add(PNode("positional_marker"));
            } else {
                PNode arg("arg", expect_name());
                if (allow_annotations && accept_op(":")) arg.add(parse_test());
                if (accept_op("=")) arg.add(parse_test());
                params.add(std::move(arg));
            }
            if (!accept_op(",")) done = true;
        }
        return params;
    }

    // ---- expressions ----

    PNode parse_target_list() {
        PNode first = parse_primary_target();
        if (!peek().is_op(",")) return first;
        PNode tup("tuple");
        tup.add(std::move(first));
        while (accept_op(",")) {
            if (at_kw("in") || peek().is_op("=") || stmt_boundary()) break;
            tup.add(parse_primary_target());
        }
        return tup;
    }

    PNode parse_primary_target() {
        if (accept_op("*")) {
            PNode n("starred");
            n.add(parse_primary_target());
            return n;
        }
        return parse_expr();  // names, attributes, subscripts, tuples in parens
    }

    PNode parse_namedexpr() {
        PNode n = parse_test();
        if (accept_op(":=")) {
            PNode walrus("named_expr");
            walrus.add(std::move(n));
            walrus.add(parse_test());
            return walrus;
        }
        return n;
    }

    PNode parse_testlist_star() {
        PNode first = parse_star_or_test();
        if (!peek().is_op(",")) return first;
        PNode tup("tuple");
        tup.add(std::move(first));
        while (accept_op(",")) {
            if (expression_boundary()) break;
            tup.add(parse_star_or_test());
        }
        return tup;
    }

    bool expression_boundary() const {
        const Token& t = peek();
        return t.is(TokKind::Newline) || t.is(TokKind::End) || t.is_op(";") || t.is_op("=") ||
               t.is_op(")") || t.is_op("]") || t.is_op("}") || t.is_op(":") ||
               (t.is(TokKind::Name) && is_python_keyword(t.text) && t.text != "lambda" &&
                t.text != "not" && t.text != "await" && t.text != "None" && t.text != "True" &&
                t.text != "False" && t.text != "yield");
    }

    PNode parse_star_or_test() {
        if (accept_op("*")) {
            PNode n("starred");
            n.add(parse_expr());
            return n;
        }
        return parse_test();
    }

    PNode parse_test() {
        if (at_kw("lambda")) return parse_lambda();
        PNode body = parse_or_test();
        if (at_kw("if")) {
            // conditional expression: <body> if <cond> else <orelse>
            advance();
            PNode n("ifexp");
            n.add(std::move(body));
            n.add(parse_or_test());
            expect_kw("else");
            n.add(parse_test());
            return n;
        }
        return body;
    }

    PNode parse_lambda() {
        expect_kw("lambda");
        PNode n("lambda");
        n.add(parse_parameters(false));
        expect_op(":");
        n.add(parse_test());
        return n;
    }

    PNode parse_or_test() {
        PNode left = parse_and_test();
        if (!at_kw("or")) return left;
        PNode n("boolop", "or");
        n.add(std::move(left));
        while (accept_kw("or")) n.add(parse_and_test());
        return n;
    }

    PNode parse_and_test() {
        PNode left = parse_not_test();
        if (!at_kw("and")) return left;
        PNode n("boolop", "and");
        n.add(std::move(left));
        while (accept_kw("and")) n.add(parse_not_test());
        return n;
    }

    PNode parse_not_test() {
        if (accept_kw("not")) {
            PNode n("unaryop", "not");
            n.add(parse_not_test());
            return n;
        }
        return parse_comparison();
    }

    PNode parse_comparison() {
        PNode left = parse_bitor();
        std::string ops;
        PNode n("compare");
        bool any = false;
        while (true) {
            std::string op;
            if (peek().is_op("<") || peek().is_op(">") || peek().is_op("==") ||
                peek().is_op("<=") || peek().is_op(">=") || peek().is_op("!=")) {
                op = advance().text;
            } else if (at_kw("in")) {
                advance();
                op = "in";
            } else if (at_kw("not") && peek(1).is_name("in")) {
                advance();
                advance();
                op = "not in";
            } else if (at_kw("is")) {
                advance();
                op = peek().is_name("not") ? (advance(), "is not") : "is";
            } else {
                break;
            }
            if (!any) {
                n.add(std::move(left));
                any = true;
            }
            if (!ops.empty()) ops += ' ';
            ops += op;
            n.add(parse_bitor());
        }
        if (!any) return left;
        n.lexeme = ops;
        return n;
    }

    PNode parse_binop_chain(PNode (Parser::*next)(), std::initializer_list<const char*> ops) {
        PNode left = (this->*next)();
        while (true) {
            bool matched = false;
            for (const char* op : ops) {
                if (peek().is_op(op)) {
                    advance();
                    PNode n("binop", op);
                    n.add(std::move(left));
                    n.add((this->*next)());
                    left = std::move(n);
                    matched = true;
                    break;
                }
            }
            if (!matched) return left;
        }
    }

    PNode parse_bitor() { return parse_binop_chain(&Parser::parse_bitxor, {"|"}); }
    PNode parse_bitxor() { return parse_binop_chain(&Parser::parse_bitand, {"^"}); }
    PNode parse_bitand() { return parse_binop_chain(&Parser::parse_shift, {"&"}); }
    PNode parse_shift() { return parse_binop_chain(&Parser::parse_arith, {"<<", ">>"}); }
    PNode parse_arith() { return parse_binop_chain(&Parser::parse_term, {"+", "-"}); }
    PNode parse_term() {
        return parse_binop_chain(&Parser::parse_factor, {"*", "@", "/", "%", "//"});
    }

    PNode parse_factor() {
        if (peek().is_op("+") || peek().is_op("-") || peek().is_op("~")) {
            PNode n("unaryop", advance().text);
            n.add(parse_factor());
            return n;
        }
        return parse_power();
    }

    PNode parse_power() {
        PNode base = parse_await_primary();
        if (accept_op("**")) {
            PNode n("binop", "**");
            n.add(std::move(base));
            n.add(parse_factor());
            return n;
        }
        return base;
    }

    PNode parse_await_primary() {
        if (accept_kw("await")) {
            PNode n("await");
            n.add(parse_await_primary());
            return n;
        }
        return parse_primary();
    }

    PNode parse_primary() {
        PNode node = parse_atom();
        while (true) {
            if (accept_op("(")) {
                PNode call("call");
                call.add(std::move(node));
                if (!peek().is_op(")")) parse_call_args(call);
                expect_op(")");
                node = std::move(call);
            } else if (accept_op("[")) {
                PNode sub("subscript");
                sub.add(std::move(node));
                sub.add(parse_subscript_list());
                expect_op("]");
                node = std::move(sub);
            } else if (accept_op(".")) {
                PNode attr("attribute", expect_name());
                attr.add(std::move(node));
                node = std::move(attr);
            } else {
                return node;
            }
        }
    }

    void parse_call_args(PNode& call) {
        while (true) {
            skip_nl_in_brackets();
            if (peek().is_op(")")) return;
            if (accept_op("*")) {
                PNode n("starred");
                n.add(parse_test());
                call.add(std::move(n));
            } else if (accept_op("**")) {
                PNode n("keyword");  // **kwargs expansion
                n.add(parse_test());
                call.add(std::move(n));
            } else {
                PNode value = parse_namedexpr();
                if (peek().is_op("=") && value.kind == "name" && value.kids.empty()) {
                    advance();
                    PNode kw("keyword", value.lexeme);
                    kw.add(parse_test());
                    call.add(std::move(kw));
                } else if (at_kw("for") || (at_kw("async") && peek(1).is_name("for"))) {
                    PNode gen("generatorexp");
                    gen.add(std::move(value));
                    parse_comp_clauses(gen);
                    call.add(std::move(gen));
                } else {
                    call.add(std::move(value));
                }
            }
            skip_nl_in_brackets();
            if (!accept_op(",")) return;
        }
    }

    void skip_nl_in_brackets() {
        while (peek().is(TokKind::Newline)) advance();
    }

    PNode parse_subscript_list() {
        PNode first = parse_subscript_item();
        if (!peek().is_op(",")) return first;
        PNode tup("tuple");
        tup.add(std::move(first));
        while (accept_op(",")) {
            if (peek().is_op("]")) break;
            tup.add(parse_subscript_item());
        }
        return tup;
    }

    PNode parse_subscript_item() {
        PNode slice("slice");
        if (!peek().is_op(":")) {
            PNode lower = parse_star_or_test();
            if (!peek().is_op(":")) return lower;
            slice.add(std::move(lower));
        }
        if (accept_op(":")) {
            if (!peek().is_op(":") && !peek().is_op("]") && !peek().is_op(",")) slice.add(parse_test());
            if (accept_op(":")) {
                if (!peek().is_op("]") && !peek().is_op(",")) slice.add(parse_test());
            }
        }
        return slice;
    }

    void parse_comp_clauses(PNode& comp) {
        while (true) {
            if (at_kw("async") && peek(1).is_name("for")) {
                advance();
                advance();
                PNode clause("comprehension");
                clause.aux = "async";
                clause.add(parse_target_list());
                expect_kw("in");
                clause.add(parse_or_test());
                while (at_kw("if")) {
                    advance();
                    clause.add(parse_or_test());
                }
                comp.add(std::move(clause));
            } else if (at_kw("for")) {
                advance();
                PNode clause("comprehension");
                clause.add(parse_target_list());
                expect_kw("in");
                clause.add(parse_or_test());
                while (at_kw("if")) {
                    advance();
                    clause.add(parse_or_test());
                }
                comp.add(std::move(clause));
            } else {
                return;
            }
        }
    }

    PNode parse_atom() {
        const Token& t = peek();
        if (t.is(TokKind::Name)) {
            if (t.text == "None") return advance(), PNode("constant", "none");
            if (t.text == "True" || t.text == "False") return advance(), PNode("constant", "bool");
            if (t.text == "yield") return parse_yield_expr();
            if (t.text == "lambda") return parse_lambda();
            if (is_python_keyword(t.text)) fail("unexpected keyword '" + t.text + "'");
            return PNode("name", advance().text);
        }
        if (t.is(TokKind::Number)) {
            advance();
            return PNode("constant", "num");
        }
        if (t.is(TokKind::String)) {
            bool is_bytes = false;
            while (peek().is(TokKind::String)) {  // adjacent literals concatenate
                for (char c : advance().text) {
                    if (c == '"' || c == '\'') break;
                    if (c == 'b' || c == 'B') is_bytes = true;
                }
            }
            return PNode("constant", is_bytes ? "bytes" : "str");
        }
        if (t.is_op("...")) {
            advance();
            return PNode("constant", "ellipsis");
        }
        if (accept_op("(")) {
            skip_nl_in_brackets();
            if (accept_op(")")) return PNode("tuple");
            PNode inner = parse_paren_body();
            expect_op(")");
            return inner;
        }
        if (accept_op("[")) {
            skip_nl_in_brackets();
            if (accept_op("]")) return PNode("list");
            PNode first = parse_star_or_namedexpr();
            skip_nl_in_brackets();
            if (at_kw("for") || (at_kw("async") && peek(1).is_name("for"))) {
                PNode comp("listcomp");
                comp.add(std::move(first));
                parse_comp_clauses(comp);
                expect_op("]");
                return comp;
            }
            PNode lst("list");
            lst.add(std::move(first));
            while (accept_op(",")) {
                skip_nl_in_brackets();
                if (peek().is_op("]")) break;
                lst.add(parse_star_or_namedexpr());
                skip_nl_in_brackets();
            }
            expect_op("]");
            return lst;
        }
        if (accept_op("{")) {
            return parse_braced();
        }
        fail("unexpected token '" + t.text + "'");
    }

    PNode parse_star_or_namedexpr() {
        if (accept_op("*")) {
            PNode n("starred");
            n.add(parse_expr());
            return n;
        }
        return parse_namedexpr();
    }

    PNode parse_paren_body() {
        if (at_kw("yield")) return parse_yield_expr();
        PNode first = parse_star_or_namedexpr();
        skip_nl_in_brackets();
        if (at_kw("for") || (at_kw("async") && peek(1).is_name("for"))) {
            PNode gen("generatorexp");
            gen.add(std::move(first));
            parse_comp_clauses(gen);
            return gen;
        }
        if (!peek().is_op(",")) return first;
        PNode tup("tuple");
        tup.add(std::move(first));
        while (accept_op(",")) {
            skip_nl_in_brackets();
            if (peek().is_op(")")) break;
            tup.add(parse_star_or_namedexpr());
            skip_nl_in_brackets();
        }
        return tup;
    }

    PNode parse_braced() {
        skip_nl_in_brackets();
        if (accept_op("}")) return PNode("dict");
        if (accept_op("**")) {
            PNode d("dict");
            PNode spread("double_starred");
            spread.add(parse_bitor());
            d.add(std::move(spread));
            while (accept_op(",")) {
                skip_nl_in_brackets();
                if (peek().is_op("}")) break;
                parse_dict_entry(d);
            }
            expect_op("}");
            return d;
        }
        PNode first = parse_star_or_namedexpr();
        skip_nl_in_brackets();
        if (accept_op(":")) {
            PNode value = parse_test();
            skip_nl_in_brackets();
            if (at_kw("for") || (at_kw("async") && peek(1).is_name("for"))) {
                PNode comp("dictcomp");
                comp.add(std::move(first));
                comp.add(std::move(value));
                parse_comp_clauses(comp);
                expect_op("}");
                return comp;
            }
            PNode d("dict");
            d.add(std::move(first));
            d.add(std::move(value));
            while (accept_op(",")) {
                skip_nl_in_brackets();
                if (peek().is_op("}")) break;
                parse_dict_entry(d);
            }
            expect_op("}");
            return d;
        }
        if (at_kw("for") || (at_kw("async") && peek(1).is_name("for"))) {
            PNode comp("setcomp");
            comp.add(std::move(first));
            parse_comp_clauses(comp);
            expect_op("}");
            return comp;
        }
        PNode st("set");
        st.add(std::move(first));
        while (accept_op(",")) {
            skip_nl_in_brackets();
            if (peek().is_op("}")) break;
            st.add(parse_star_or_namedexpr());
            skip_nl_in_brackets();
        }
        expect_op("}");
        return st;
    }

    void parse_dict_entry(PNode& d) {
        if (accept_op("**")) {
            PNode spread("double_starred");
            spread.add(parse_bitor());
            d.add(std::move(spread));
            return;
        }
        d.add(parse_test());
        expect_op(":");
        d.add(parse_test());
    }

    PNode parse_expr() { return parse_bitor(); }
};

}  // namespace detail

// Parse one code cell. Throws ParseError on anything outside the grammar;
// corpus drivers catch it and count the cell as unparseable.
inline AstTree parse_cell_ast(std::string_view source) {
    detail::Parser parser(tokenize(source));
    detail::PNode mod = parser.parse_module();
    AstTree tree;
    detail::flatten(mod, -1, tree);
    return tree;
}

}  // namespace coral::py
