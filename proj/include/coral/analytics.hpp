#pragma once

#include <array>
#include <charconv>
#include <cmath>
#include <istream>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "coral/call_resolution.hpp"
#include "coral/ipynb.hpp"
#include "coral/stage.hpp"

#include "json.hpp"

namespace coral {

// Expert annotation for evaluation only. Gold labels never feed training.
struct GoldLabel {
    std::string cell_id;
    Stage stage = Stage::IMPORT;
};

// A materialized model decision, as read back from a predictions file.
struct PredictedLabel {
    std::string cell_id;
    Stage stage = Stage::UNLABELED;
};

struct EvalResult {
    double accuracy = 0;
    size_t total = 0;
    // Rows are gold stages, columns are predicted stages.
    std::array<std::array<size_t, kNumRealStages>, kNumRealStages> confusion{};
};

inline EvalResult evaluate_against_gold(const std::vector<PredictedLabel>& predictions,
                                        const std::vector<GoldLabel>& gold) {
    if (gold.empty()) throw ConfigError("empty gold label set");
    std::unordered_map<std::string, Stage> by_id;
    by_id.reserve(predictions.size());
    for (const auto& p : predictions) {
        if (!by_id.emplace(p.cell_id, p.stage).second) {
            throw SchemaError("duplicate prediction for cell '" + p.cell_id + "'");
        }
    }

    auto list_ids = [](const char* what, const std::vector<std::string>& ids) {
        std::string msg = what;
        size_t shown = std::min<size_t>(ids.size(), 10);
        for (size_t i = 0; i < shown; ++i) msg += " '" + ids[i] + "'";
        if (ids.size() > shown) msg += " (and " + std::to_string(ids.size() - shown) + " more)";
        return msg;
    };

    std::set<std::string> seen;
    std::vector<std::string> missing;
    for (const auto& g : gold) {
        if (g.stage == Stage::UNLABELED) {
            throw SchemaError("gold label for cell '" + g.cell_id + "' is UNLABELED");
        }
        if (!seen.insert(g.cell_id).second) {
            throw SchemaError("duplicate gold label for cell '" + g.cell_id + "'");
        }
        if (!by_id.count(g.cell_id)) missing.push_back(g.cell_id);
    }
    if (!missing.empty()) {
        throw SchemaError(list_ids("gold cells missing from predictions:", missing));
    }
    std::vector<std::string> extra;
    for (const auto& p : predictions) {
        if (!seen.count(p.cell_id)) extra.push_back(p.cell_id);
    }
    if (!extra.empty()) {
        throw SchemaError(list_ids("predictions for cells absent from gold:", extra));
    }

    EvalResult r;
    size_t hits = 0;
    for (const auto& g : gold) {
        Stage predicted = by_id.at(g.cell_id);
        if (predicted == Stage::UNLABELED) {
            throw SchemaError("prediction for cell '" + g.cell_id + "' is UNLABELED");
        }
        ++r.confusion[static_cast<size_t>(g.stage)][static_cast<size_t>(predicted)];
        if (predicted == g.stage) ++hits;
    }
    r.total = gold.size();
    r.accuracy = static_cast<double>(hits) / static_cast<double>(r.total);
    return r;
}

// Distribution of predicted stages over cells whose resolved call set contains
// `function_name`. Returns nothing when the function never occurs.
inline std::optional<std::array<double, kNumRealStages>> function_stage_distribution(
    const std::vector<PredictedLabel>& predictions, const std::vector<CellRecord>& records,
    const std::string& function_name) {
    std::unordered_map<std::string, Stage> by_id;
    for (const auto& p : predictions) by_id[p.cell_id] = p.stage;

    std::array<size_t, kNumRealStages> counts{};
    size_t total = 0;
    py::ImportAliasTable table;
    std::string current_notebook;
    for (const CellRecord& rec : records) {
        if (rec.notebook_id != current_notebook) {
            table = py::ImportAliasTable{};
            current_notebook = rec.notebook_id;
        }
        std::set<std::string> calls;
        try {
            calls = py::resolve_call_names(py::parse_cell_ast(rec.source), table);
        } catch (const ParseError&) {
            continue;
        }
        if (!calls.count(function_name)) continue;
        auto it = by_id.find(rec.cell_id());
        if (it == by_id.end() || it->second == Stage::UNLABELED) continue;
        ++counts[static_cast<size_t>(it->second)];
        ++total;
    }
    if (total == 0) return std::nullopt;
    std::array<double, kNumRealStages> dist{};
    for (int k = 0; k < kNumRealStages; ++k) {
        dist[static_cast<size_t>(k)] =
            static_cast<double>(counts[static_cast<size_t>(k)]) / static_cast<double>(total);
    }
    return dist;
}

// Per-group stage mix. A group is one notebook, or several notebooks
// concatenated in order.
struct StageProfile {
    std::string group_id;
    std::array<double, kNumRealStages> fractions{};
    double entropy = 0;          // natural log, over the five stages
    double different_next = 0;   // fraction of consecutive labeled pairs that switch stage
    size_t n_cells = 0;          // labeled cells in the group
    size_t n_transitions = 0;
    bool defined = false;        // false when the group has no labeled cells
};

inline StageProfile stage_profile(std::string group_id, const std::vector<Stage>& stages) {
    StageProfile p;
    p.group_id = std::move(group_id);
    std::array<size_t, kNumRealStages> counts{};
    std::optional<Stage> prev;
    size_t differing = 0;
    for (Stage s : stages) {
        if (s == Stage::UNLABELED) continue;
        ++counts[static_cast<size_t>(s)];
        ++p.n_cells;
        if (prev) {
            ++p.n_transitions;
            if (*prev != s) ++differing;
        }
        prev = s;
    }
    if (p.n_cells == 0) return p;
    p.defined = true;
    for (int k = 0; k < kNumRealStages; ++k) {
        double frac =
            static_cast<double>(counts[static_cast<size_t>(k)]) / static_cast<double>(p.n_cells);
        p.fractions[static_cast<size_t>(k)] = frac;
        if (frac > 0) p.entropy -= frac * std::log(frac);
    }
    if (p.n_transitions > 0) {
        p.different_next = static_cast<double>(differing) / static_cast<double>(p.n_transitions);
    }
    return p;
}

struct TransitionStats {
    std::array<std::array<size_t, kNumRealStages>, kNumRealStages> counts{};
    // Row-normalized counts; rows with no outgoing transitions stay zero.
    std::array<std::array<double, kNumRealStages>, kNumRealStages> matrix{};
    std::array<size_t, kNumRealStages> row_totals{};
    std::array<double, kNumRealStages> different_next{};  // 1 − diagonal where defined
    size_t total_transitions = 0;
    double overall_different = 0;
};

// Transitions between consecutive labeled cells within each notebook.
// Unlabeled cells are bridged over by default; with `break_on_unlabeled` they
// sever the chain instead.
inline TransitionStats transition_stats(const std::vector<std::vector<Stage>>& notebooks,
                                        bool break_on_unlabeled = false) {
    TransitionStats t;
    size_t same = 0;
    for (const auto& stages : notebooks) {
        std::optional<Stage> prev;
        for (Stage s : stages) {
            if (s == Stage::UNLABELED) {
                if (break_on_unlabeled) prev.reset();
                continue;
            }
            if (prev) {
                ++t.counts[static_cast<size_t>(*prev)][static_cast<size_t>(s)];
                ++t.total_transitions;
                if (*prev == s) ++same;
            }
            prev = s;
        }
    }
    for (size_t i = 0; i < kNumRealStages; ++i) {
        size_t row = 0;
        for (size_t j = 0; j < kNumRealStages; ++j) row += t.counts[i][j];
        t.row_totals[i] = row;
        if (row == 0) continue;
        for (size_t j = 0; j < kNumRealStages; ++j) {
            t.matrix[i][j] = static_cast<double>(t.counts[i][j]) / static_cast<double>(row);
        }
        t.different_next[i] = 1.0 - t.matrix[i][i];
    }
    if (t.total_transitions > 0) {
        t.overall_different = 1.0 - static_cast<double>(same) /
                                        static_cast<double>(t.total_transitions);
    }
    return t;
}

// Shortest decimal that round-trips the exact double, so emitted reports are
// deterministic and parse back bit-identical.
inline std::string fmt_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

inline std::string profiles_csv(const std::vector<StageProfile>& profiles) {
    std::string out = "group_id,p_IMPORT,p_WRANGLE,p_EXPLORE,p_MODEL,p_EVALUATE,entropy,n_cells\n";
    for (const StageProfile& p : profiles) {
        out += csv_escape(p.group_id);
        if (p.defined) {
            for (double f : p.fractions) out += "," + fmt_double(f);
            out += "," + fmt_double(p.entropy);
        } else {
            out += ",,,,,,";  // no labeled cells: fractions and entropy are undefined
        }
        out += "," + std::to_string(p.n_cells) + "\n";
    }
    return out;
}

inline nlohmann::json stage_labels_json() {
    nlohmann::json labels = nlohmann::json::array();
    for (int k = 0; k < kNumRealStages; ++k) labels.push_back(kStageNames[static_cast<size_t>(k)]);
    return labels;
}

inline nlohmann::json confusion_json(const EvalResult& r) {
    nlohmann::json j;
    j["accuracy"] = r.accuracy;
    j["total"] = r.total;
    j["labels"] = stage_labels_json();
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.confusion) rows.push_back(row);
    j["confusion"] = rows;  // rows gold, columns predicted
    return j;
}

inline nlohmann::json transitions_json(const TransitionStats& t) {
    nlohmann::json j;
    j["labels"] = stage_labels_json();
    nlohmann::json counts = nlohmann::json::array();
    for (const auto& row : t.counts) counts.push_back(row);
    j["counts"] = counts;
    nlohmann::json matrix = nlohmann::json::array();
    for (const auto& row : t.matrix) matrix.push_back(row);
    j["matrix"] = matrix;
    j["row_totals"] = t.row_totals;
    j["different_next"] = t.different_next;
    j["total_transitions"] = t.total_transitions;
    j["overall_different"] = t.overall_different;
    return j;
}

// Gold CSV: header `cell_id,stage`, one annotation per row.
inline std::vector<GoldLabel> read_gold_csv(std::istream& in, const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw SchemaError("empty gold file: " + what);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "cell_id,stage") {
        throw SchemaError("gold file " + what + " must start with header 'cell_id,stage'");
    }
    std::vector<GoldLabel> out;
    size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        size_t comma = line.rfind(',');
        if (comma == std::string::npos) {
            throw SchemaError("gold file " + what + " line " + std::to_string(line_no) +
                              " is not 'cell_id,stage'");
        }
        GoldLabel g;
        g.cell_id = line.substr(0, comma);
        g.stage = stage_from_name(line.substr(comma + 1));
        if (g.stage == Stage::UNLABELED) {
            throw SchemaError("gold file " + what + " line " + std::to_string(line_no) +
                              " uses UNLABELED");
        }
        out.push_back(std::move(g));
    }
    return out;
}

}  // namespace coral
