#pragma once

#include <algorithm>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "coral/call_resolution.hpp"
#include "coral/common.hpp"
#include "coral/python_ast.hpp"

namespace coral {

enum class CellKind { Code, Markdown };

struct NotebookCell {
    int index = 0;
    CellKind kind = CellKind::Code;
    std::string source;
};

struct NotebookDocument {
    std::string notebook_id;
    std::vector<NotebookCell> cells;
    int dropped_cells = 0;  // raw/unknown cell types, never coerced
};

struct CellRecord {
    std::string notebook_id;
    int cell_index = 0;
    std::string source;
    std::optional<std::string> markdown_context;
    std::optional<int> markdown_distance;

    std::string cell_id() const { return notebook_id + ":" + std::to_string(cell_index); }
};

// cell_id round-trip: the separator is the last colon, so notebook ids may
// themselves contain colons.
inline std::pair<std::string, int> split_cell_id(const std::string& id) {
    size_t colon = id.rfind(':');
    if (colon == std::string::npos || colon + 1 == id.size())
        throw SchemaError("malformed cell_id '" + id + "'");
    int index = 0;
    try {
        index = std::stoi(id.substr(colon + 1));
    } catch (const std::exception&) {
        throw SchemaError("malformed cell_id '" + id + "'");
    }
    return {id.substr(0, colon), index};
}

// nbformat-4 ingestion. Kept cells are renumbered densely in document order;
// dropped cells are only counted.
inline NotebookDocument parse_notebook(std::string_view bytes, std::string notebook_id) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(bytes);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed notebook JSON at byte " + std::to_string(e.byte));
    }
    if (!doc.is_object() || !doc.contains("cells"))
        throw SchemaError("missing cells field in notebook");
    const auto& cells = doc["cells"];
    if (!cells.is_array()) throw SchemaError("cells field is not an array");

    NotebookDocument out;
    out.notebook_id = std::move(notebook_id);
    for (const auto& cell : cells) {
        if (!cell.is_object() || !cell.contains("cell_type")) {
            ++out.dropped_cells;
            continue;
        }
        std::string type = cell["cell_type"].is_string() ? cell["cell_type"].get<std::string>() : "";
        CellKind kind;
        if (type == "code") {
            kind = CellKind::Code;
        } else if (type == "markdown") {
            kind = CellKind::Markdown;
        } else {
            ++out.dropped_cells;
            continue;
        }
        std::string source;
        if (cell.contains("source")) {
            const auto& src = cell["source"];
            if (src.is_string()) {
                source = src.get<std::string>();
            } else if (src.is_array()) {
                for (const auto& part : src)
                    if (part.is_string()) source += part.get<std::string>();
            }
        }
        out.cells.push_back({static_cast<int>(out.cells.size()), kind, std::move(source)});
    }
    return out;
}

// One record per code cell; markdown_context is the nearest preceding
// markdown cell when it is at most three indices back.
inline std::vector<CellRecord> associate_markdown(const NotebookDocument& doc) {
    std::vector<CellRecord> records;
    for (size_t i = 0; i < doc.cells.size(); ++i) {
        if (doc.cells[i].kind != CellKind::Code) continue;
        CellRecord rec;
        rec.notebook_id = doc.notebook_id;
        rec.cell_index = doc.cells[i].index;
        rec.source = doc.cells[i].source;
        for (int back = 1; back <= 3 && back <= static_cast<int>(i); ++back) {
            const NotebookCell& prev = doc.cells[i - static_cast<size_t>(back)];
            if (prev.kind == CellKind::Markdown) {
                rec.markdown_context = prev.source;
                rec.markdown_distance = back;
                break;
            }
        }
        records.push_back(std::move(rec));
    }
    return records;
}

inline const std::set<std::string>& corpus_library_filter() {
    static const std::set<std::string> libs = {"pandas", "statsmodels", "gensim", "keras",
                                               "sklearn", "xgboost", "scipy"};
    return libs;
}

namespace detail {

inline void collect_import_roots(const py::AstTree& tree, std::set<std::string>& roots) {
    for (const auto& node : tree.nodes) {
        if (node.kind == "alias" && node.lexeme != "*") {
            roots.insert(node.lexeme.substr(0, node.lexeme.find('.')));
        } else if (node.kind == "import_from" && !node.lexeme.empty()) {
            roots.insert(node.lexeme.substr(0, node.lexeme.find('.')));
        }
    }
}

}  // namespace detail

// Top-level packages imported anywhere in the notebook's code cells. Cells
// that fail to parse as a whole (magics etc.) are retried line by line so an
// import sharing a cell with shell syntax still counts.
inline std::set<std::string> notebook_import_roots(const NotebookDocument& doc) {
    std::set<std::string> roots;
    for (const NotebookCell& cell : doc.cells) {
        if (cell.kind != CellKind::Code) continue;
        try {
            py::AstTree tree = py::parse_cell_ast(cell.source);
            detail::collect_import_roots(tree, roots);
        } catch (const ParseError&) {
            size_t pos = 0;
            while (pos <= cell.source.size()) {
                size_t nl = cell.source.find('\n', pos);
                std::string line = cell.source.substr(
                    pos, nl == std::string::npos ? std::string::npos : nl - pos);
                try {
                    detail::collect_import_roots(py::parse_cell_ast(line), roots);
                } catch (const ParseError&) {
                }
                if (nl == std::string::npos) break;
                pos = nl + 1;
            }
        }
    }
    return roots;
}

inline bool notebook_passes_filter(const NotebookDocument& doc) {
    std::set<std::string> roots = notebook_import_roots(doc);
    for (const std::string& lib : corpus_library_filter())
        if (roots.count(lib)) return true;
    return false;
}

// Keep notebooks that import at least one corpus library, then split by
// notebook id: ids are ranked by a seeded hash and the first ⌊ratio·n⌋ go to
// train. Membership depends only on (seed, id set), never on input order.
inline std::pair<std::vector<NotebookDocument>, std::vector<NotebookDocument>> filter_and_split(
    std::vector<NotebookDocument> docs, double ratio, uint64_t seed) {
    if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must be in (0, 1)");

    std::vector<NotebookDocument> kept;
    for (auto& doc : docs)
        if (notebook_passes_filter(doc)) kept.push_back(std::move(doc));

    uint64_t stream = seed_stream(seed, "notebook-split");
    std::vector<size_t> order(kept.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        uint64_t ha = mix64(fnv1a64(kept[a].notebook_id) ^ stream);
        uint64_t hb = mix64(fnv1a64(kept[b].notebook_id) ^ stream);
        if (ha != hb) return ha < hb;
        return kept[a].notebook_id < kept[b].notebook_id;
    });

    // nudge before flooring so ratio 0.7 of 10 notebooks gives 7, not 6
    size_t n_train = static_cast<size_t>(ratio * static_cast<double>(kept.size()) + 1e-9);
    std::pair<std::vector<NotebookDocument>, std::vector<NotebookDocument>> out;
    for (size_t r = 0; r < order.size(); ++r) {
        if (r < n_train)
            out.first.push_back(std::move(kept[order[r]]));
        else
            out.second.push_back(std::move(kept[order[r]]));
    }
    return out;
}

// JSONL record shape used by the ingest artifact.
inline nlohmann::json record_to_json(const CellRecord& rec) {
    nlohmann::json j;
    j["notebook_id"] = rec.notebook_id;
    j["cell_index"] = rec.cell_index;
    j["source"] = rec.source;
    j["markdown_context"] = rec.markdown_context ? nlohmann::json(*rec.markdown_context)
                                                 : nlohmann::json(nullptr);
    j["markdown_distance"] = rec.markdown_distance ? nlohmann::json(*rec.markdown_distance)
                                                   : nlohmann::json(nullptr);
    return j;
}

inline CellRecord record_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("notebook_id") || !j.contains("cell_index") ||
        !j.contains("source"))
        throw SchemaError("cell record missing required fields");
    CellRecord rec;
    rec.notebook_id = j["notebook_id"].get<std::string>();
    rec.cell_index = j["cell_index"].get<int>();
    rec.source = j["source"].get<std::string>();
    if (j.contains("markdown_context") && j["markdown_context"].is_string()) {
        rec.markdown_context = j["markdown_context"].get<std::string>();
        if (j.contains("markdown_distance") && j["markdown_distance"].is_number_integer())
            rec.markdown_distance = j["markdown_distance"].get<int>();
    }
    return rec;
}

}  // namespace coral
