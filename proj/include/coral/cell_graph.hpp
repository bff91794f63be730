#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coral/common.hpp"
#include "coral/python_ast.hpp"
#include "coral/text.hpp"

namespace coral {

enum class NodeKind { CLS, AST, MARKDOWN };

inline const char* node_kind_name(NodeKind k) {
    switch (k) {
        case NodeKind::CLS: return "CLS";
        case NodeKind::AST: return "AST";
        default: return "MARKDOWN";
    }
}

struct GraphNode {
    std::string label;
    NodeKind kind;
};

// The per-cell input graph: node 0 is the virtual [CLS] node, followed by the
// AST in pre-order, followed by markdown tokens. A is symmetric with a zero
// diagonal; Ã = A + I adds the self loops the attention mask uses.
struct CellGraph {
    std::string cell_id;
    std::vector<GraphNode> nodes;
    std::vector<uint8_t> adj;  // flattened n×n, A (no self loops)

    size_t n() const { return nodes.size(); }
    bool a(size_t i, size_t j) const { return adj[i * n() + j] != 0; }
    bool a_tilde(size_t i, size_t j) const { return i == j || a(i, j); }

    size_t undirected_edge_count() const {
        size_t total = 0;
        for (size_t i = 0; i < n(); ++i)
            for (size_t j = i + 1; j < n(); ++j)
                if (a(i, j)) ++total;
        return total;
    }
};

// Assemble the graph and truncate to the first M nodes. Order puts markdown
// last so oversized cells lose markdown context before code structure; the
// [CLS] node always survives. Edges: AST tree edges, every markdown node to
// every AST node, and [CLS] to everything kept.
inline CellGraph build_cell_graph(const py::AstTree& tree,
                                  const std::vector<std::string>& markdown_tokens, size_t M,
                                  std::string cell_id = "") {
    if (M < 1) throw ConfigError("graph node budget M must be at least 1");

    CellGraph g;
    g.cell_id = std::move(cell_id);
    g.nodes.push_back({"[CLS]", NodeKind::CLS});
    size_t n_ast = 0;
    for (size_t i = 0; i < tree.size() && g.nodes.size() < M; ++i) {
        g.nodes.push_back({tree.label(static_cast<int>(i)), NodeKind::AST});
        ++n_ast;
    }
    for (size_t i = 0; i < markdown_tokens.size() && g.nodes.size() < M; ++i)
        g.nodes.push_back({markdown_tokens[i], NodeKind::MARKDOWN});

    size_t n = g.nodes.size();
    g.adj.assign(n * n, 0);
    auto connect = [&](size_t i, size_t j) {
        if (i == j) return;
        g.adj[i * n + j] = 1;
        g.adj[j * n + i] = 1;
    };

    // AST tree edges: pre-order ids shift by one for the [CLS] slot
    for (size_t i = 1; i < tree.size(); ++i) {
        size_t child = i + 1;
        size_t parent = static_cast<size_t>(tree.nodes[i].parent) + 1;
        if (child < 1 + n_ast) connect(parent, child);
    }
    // markdown ↔ AST, complete bipartite over what survived truncation
    for (size_t m = 1 + n_ast; m < n; ++m)
        for (size_t a = 1; a <= n_ast; ++a) connect(m, a);
    // [CLS] reaches everything
    for (size_t v = 1; v < n; ++v) connect(0, v);
    return g;
}

inline CellGraph build_cell_graph(const py::AstTree& tree, std::string_view markdown_context,
                                  size_t M, std::string cell_id = "") {
    return build_cell_graph(tree, tokenize_markdown(markdown_context), M, std::move(cell_id));
}

// Debug dump for fixture diffing: {nodes:[{label,kind}], edges:[[i,j]]} with
// each undirected edge listed once, i < j.
inline nlohmann::json cell_graph_to_json(const CellGraph& g) {
    nlohmann::json out;
    out["nodes"] = nlohmann::json::array();
    for (const GraphNode& node : g.nodes)
        out["nodes"].push_back({{"label", node.label}, {"kind", node_kind_name(node.kind)}});
    out["edges"] = nlohmann::json::array();
    for (size_t i = 0; i < g.n(); ++i)
        for (size_t j = i + 1; j < g.n(); ++j)
            if (g.a(i, j)) out["edges"].push_back({i, j});
    return out;
}

}  // namespace coral
