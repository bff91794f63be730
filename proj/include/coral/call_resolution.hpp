#pragma once

#include <cctype>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "coral/python_ast.hpp"
#include "coral/text.hpp"

namespace coral::py {

// Tracks what names mean across a notebook, in cell order. Two layers:
//   aliases: name -> fully qualified module/function path, from import forms
//   vars:    name -> the qualified call that produced the value (one step)
// Later bindings shadow earlier ones; plain rebinding removes a name.
struct ImportAliasTable {
    std::map<std::string, std::string> aliases;
    std::map<std::string, std::string> vars;

    void shadow(const std::string& name) {
        aliases.erase(name);
        vars.erase(name);
    }
    void bind_alias(const std::string& name, std::string path) {
        vars.erase(name);
        aliases[name] = std::move(path);
    }
    void bind_var(const std::string& name, std::string producer) {
        aliases.erase(name);
        vars[name] = std::move(producer);
    }
};

namespace detail {

struct Resolution {
    std::string qualified;    // empty when unresolvable
    bool import_rooted = false;  // base came from the alias table (not a var)
};

class CallResolver {
public:
    CallResolver(const AstTree& tree, ImportAliasTable& table)
        : tree_(tree), table_(table), kids_(tree.children()) {}

    std::set<std::string> run() {
        walk_block(0);
        return std::move(calls_);
    }

private:
    const AstTree& tree_;
    ImportAliasTable& table_;
    std::vector<std::vector<int>> kids_;
    std::set<std::string> calls_;

    const AstNode& node(int i) const { return tree_.nodes[i]; }

    // Statements in source order: scan each for calls first, then apply the
    // bindings it introduces, so `df = pd.read_csv(f)` resolves before `df`
    // shadows anything and is visible to the next statement.
    void walk_block(int id) {
        for (int child : kids_[id]) walk_statement(child);
    }

    void walk_statement(int id) {
        const std::string& kind = node(id).kind;
        if (kind == "import") {
            for (int a : kids_[id]) apply_import_alias(a);
            return;
        }
        if (kind == "import_from") {
            apply_from_import(id);
            return;
        }
        // Calls in the whole statement resolve against the table as it stood
        // before the statement; then its bindings (including ones nested in
        // compound bodies) take effect for the statements that follow.
        scan_expressions(id);
        apply_bindings(id);
    }

    void apply_import_alias(int alias_id) {
        const AstNode& a = node(alias_id);
        if (a.kind != "alias") return;
        const std::string& dotted = a.lexeme;
        if (!a.aux.empty()) {
            table_.bind_alias(a.aux, dotted);
        } else {
            // `import a.b` binds the top-level name `a`
            std::string head = dotted.substr(0, dotted.find('.'));
            table_.bind_alias(head, head);
        }
    }

    void apply_from_import(int id) {
        const std::string& module = node(id).lexeme;
        if (module.empty()) return;  // relative import, nothing to qualify
        for (int a : kids_[id]) {
            const AstNode& al = node(a);
            if (al.kind != "alias" || al.lexeme == "*") continue;
            std::string full = module + "." + al.lexeme;
            table_.bind_alias(al.aux.empty() ? al.lexeme : al.aux, std::move(full));
        }
    }

    // Find every call in the subtree and record its qualified name (if any).
    void scan_expressions(int id) {
        if (node(id).kind == "call") resolve_call(id);
        for (int c : kids_[id]) scan_expressions(c);
    }

    Resolution resolve_call(int call_id) {
        Resolution r = resolve_callee(kids_[call_id].empty() ? -1 : kids_[call_id][0]);
        if (!r.qualified.empty()) calls_.insert(r.qualified);
        return r;
    }

    // Callee shapes: name, attribute chain ending in a name, a call result,
    // or something opaque (subscript, literal) which resolves to nothing.
    Resolution resolve_callee(int id) {
        if (id < 0) return {};
        const AstNode& n = node(id);
        if (n.kind == "name") {
            auto it = table_.aliases.find(n.lexeme);
            if (it != table_.aliases.end()) return {it->second, true};
            auto vt = table_.vars.find(n.lexeme);
            if (vt != table_.vars.end()) return {vt->second, false};
            return {};
        }
        if (n.kind == "attribute") {
            Resolution base = resolve_callee(kids_[id].empty() ? -1 : kids_[id][0]);
            if (base.qualified.empty()) return {};
            base.qualified += "." + n.lexeme;
            return base;
        }
        if (n.kind == "call") {
            // direct chaining: pd.read_csv(f).dropna()
            return resolve_call(id);
        }
        return {};
    }

    void apply_bindings(int id) {
        const AstNode& n = node(id);
        const std::string& kind = n.kind;
        if (kind == "import") {
            for (int a : kids_[id]) apply_import_alias(a);
            return;
        }
        if (kind == "import_from") {
            apply_from_import(id);
            return;
        }
        if (kind == "assignment" || kind == "aug_assignment" ||
            (kind == "ann_assignment" && kids_[id].size() == 3)) {
            int value = kids_[id].back();
            Resolution r;
            if (kind != "aug_assignment" && node(value).kind == "call") r = resolve_callee(value);
            size_t targets = kids_[id].size() - 1;
            if (kind == "ann_assignment") targets = 1;
            for (size_t t = 0; t < targets; ++t) bind_target(kids_[id][t], r);
            return;
        }
        if (kind == "function_def" || kind == "class_def") {
            table_.shadow(n.lexeme);
            for (int c : kids_[id]) apply_bindings(c);
            return;
        }
        if (kind == "for") {
            if (!kids_[id].empty()) shadow_targets(kids_[id][0]);
            for (int c : kids_[id]) apply_bindings(c);
            return;
        }
        if (kind == "with_item") {
            if (kids_[id].size() == 2) shadow_targets(kids_[id][1]);
            return;
        }
        if (kind == "delete") {
            for (int c : kids_[id]) shadow_targets(c);
            return;
        }
        if (kind == "named_expr") {
            if (!kids_[id].empty() && node(kids_[id][0]).kind == "name") {
                Resolution r;
                if (node(kids_[id][1]).kind == "call") r = resolve_callee(kids_[id][1]);
                bind_target(kids_[id][0], r);
            }
            return;
        }
        for (int c : kids_[id]) apply_bindings(c);
    }

    void bind_target(int target, const Resolution& value) {
        const AstNode& t = node(target);
        if (t.kind == "name") {
            // Only a call rooted in an import is worth tracking; chains are
            // one assignment step deep, so var-rooted values just shadow.
            if (value.import_rooted && !value.qualified.empty())
                table_.bind_var(t.lexeme, value.qualified);
            else
                table_.shadow(t.lexeme);
            return;
        }
        shadow_targets(target);
    }

    void shadow_targets(int id) {
        const AstNode& n = node(id);
        if (n.kind == "name") {
            table_.shadow(n.lexeme);
            return;
        }
        if (n.kind == "tuple" || n.kind == "list" || n.kind == "starred") {
            for (int c : kids_[id]) shadow_targets(c);
        }
        // attribute/subscript targets don't rebind the base name
    }
};

}  // namespace detail

// Resolve every called function in the cell to a fully qualified name where
// possible, updating `table` with the imports and variable bindings the cell
// introduces so later cells in the notebook see them.
inline std::set<std::string> resolve_call_names(const AstTree& tree, ImportAliasTable& table) {
    return detail::CallResolver(tree, table).run();
}

// Per-cell statistics feeding the rule-based labeling.
struct CellStats {
    int code_lines = 0;            // physical lines that aren't blank/comment
    int top_statements = 0;        // direct children of module
    int import_statements = 0;     // import / from-import among those
    bool binds_variable = false;   // assignment or with/for binding at top level
    int markdown_words = 0;        // whitespace tokens in the markdown context
};

inline CellStats compute_cell_stats(std::string_view source, const AstTree& tree,
                                    std::string_view markdown) {
    CellStats s;
    size_t pos = 0;
    while (pos <= source.size()) {
        size_t nl = source.find('\n', pos);
        std::string_view line = source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        for (char c : line) {
            if (c == '#') break;
            if (!std::isspace(static_cast<unsigned char>(c))) {
                ++s.code_lines;
                break;
            }
        }
        if (nl == std::string_view::npos) break;
        pos = nl + 1;
    }

    auto kids = tree.children();
    for (int top : kids[0]) {
        ++s.top_statements;
        const std::string& kind = tree.nodes[top].kind;
        if (kind == "import" || kind == "import_from") ++s.import_statements;
        if (kind == "assignment" || kind == "aug_assignment") s.binds_variable = true;
        if (kind == "ann_assignment" && kids[top].size() == 3) s.binds_variable = true;
        if (kind == "for") s.binds_variable = true;
        if (kind == "with") {
            for (int item : kids[top])
                if (tree.nodes[item].kind == "with_item" && kids[item].size() == 2)
                    s.binds_variable = true;
        }
    }
    s.markdown_words = static_cast<int>(whitespace_tokens(markdown).size());
    return s;
}

}  // namespace coral::py
