#pragma once

#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "coral/call_resolution.hpp"
#include "coral/common.hpp"
#include "coral/ipynb.hpp"
#include "coral/stage.hpp"
#include "coral/text.hpp"

namespace coral {

// Qualified function name -> stage. Only the four seeded stages may appear.
struct SeedTable {
    std::map<std::string, Stage> entries;
};

inline SeedTable default_seed_table() {
    SeedTable t;
    auto add = [&](const char* name, Stage s) { t.entries.emplace(name, s); };
    add("pandas.read_csv", Stage::WRANGLE);
    add("pandas.read_csv.dropna", Stage::WRANGLE);
    add("pandas.read_csv.fillna", Stage::WRANGLE);
    add("pandas.DataFrame.fillna", Stage::WRANGLE);
    add("sklearn.datasets.load_iris", Stage::WRANGLE);
    add("scipy.misc.imread", Stage::WRANGLE);
    add("scipy.io.loadmat", Stage::WRANGLE);
    add("sklearn.preprocessing.LabelEncoder", Stage::WRANGLE);
    add("scipy.interpolate.interp1d", Stage::WRANGLE);

    add("matplotlib.pyplot.show", Stage::EXPLORE);
    add("matplotlib.pyplot.plot", Stage::EXPLORE);
    add("matplotlib.pyplot.figure", Stage::EXPLORE);
    add("seaborn.pairplot", Stage::EXPLORE);
    add("seaborn.heatmap", Stage::EXPLORE);
    add("seaborn.lmplot", Stage::EXPLORE);
    add("pandas.read_csv.describe", Stage::EXPLORE);
    add("pandas.DataFrame.describe", Stage::EXPLORE);

    add("sklearn.decomposition.PCA", Stage::MODEL);
    add("sklearn.naive_bayes.GaussianNB", Stage::MODEL);
    add("sklearn.ensemble.RandomForestClassifier", Stage::MODEL);
    add("sklearn.linear_model.LinearRegression", Stage::MODEL);
    add("sklearn.linear_model.LogisticRegression", Stage::MODEL);
    add("sklearn.tree.DecisionTreeRegressor", Stage::MODEL);
    add("sklearn.ensemble.BaggingRegressor", Stage::MODEL);
    add("sklearn.neighbors.KNeighborsClassifier", Stage::MODEL);
    add("sklearn.naive_bayes.MultinomialNB", Stage::MODEL);
    add("sklearn.svm.SVC", Stage::MODEL);
    add("sklearn.tree.DecisionTreeClassifier", Stage::MODEL);
    add("tensorflow.Session", Stage::MODEL);
    add("sklearn.linear_model.Ridge", Stage::MODEL);
    add("sklearn.linear_model.Lasso", Stage::MODEL);

    add("sklearn.cross_validation.cross_val_score", Stage::EVALUATE);
    add("sklearn.metrics.mean_squared_error", Stage::EVALUATE);
    add("sklearn.model_selection.cross_val_score", Stage::EVALUATE);
    add("scipy.stats.ttest_ind", Stage::EVALUATE);
    add("sklearn.metrics.accuracy_score", Stage::EVALUATE);
    return t;
}

// Editable JSON form: an object mapping qualified names to stage names.
inline SeedTable load_seed_table(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open seed table file: " + path);
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("malformed seed table JSON at byte " + std::to_string(e.byte));
    }
    if (!doc.is_object()) throw SchemaError("seed table must be a JSON object");
    SeedTable t;
    for (const auto& [name, value] : doc.items()) {
        if (!value.is_string()) throw SchemaError("seed table stage for '" + name + "' must be a string");
        Stage s = stage_from_name(value.get<std::string>());
        if (s == Stage::IMPORT || s == Stage::UNLABELED)
            throw SchemaError("seed table stage for '" + name + "' must be one of the four seeded stages");
        t.entries.emplace(name, s);
    }
    return t;
}

struct WeakLabel {
    std::string cell_id;
    Stage stage = Stage::UNLABELED;
    std::set<int> fired_rules;  // subset of {1..5}; empty iff UNLABELED
};

namespace detail {

inline bool contains_phrase(const std::vector<std::string>& words,
                            std::initializer_list<const char*> phrase) {
    size_t m = phrase.size();
    if (words.size() < m) return false;
    for (size_t i = 0; i + m <= words.size(); ++i) {
        bool all = true;
        size_t j = 0;
        for (const char* w : phrase) {
            if (words[i + j] != w) {
                all = false;
                break;
            }
            ++j;
        }
        if (all) return true;
    }
    return false;
}

}  // namespace detail

// Conflict resolution: the emitted stage is the highest-priority one among
// the fired rules, IMPORT > MODEL > EVALUATE > EXPLORE > WRANGLE.
inline std::pair<Stage, std::set<int>> resolve_fired(
    const std::vector<std::pair<Stage, int>>& fired) {
    Stage stage = Stage::UNLABELED;
    std::set<int> rules;
    for (const auto& [s, rule] : fired) {
        rules.insert(rule);
        if (stage == Stage::UNLABELED || stage_priority_rank(s) < stage_priority_rank(stage))
            stage = s;
    }
    return {stage, std::move(rules)};
}

// The five heuristics. `calls` is resolve_call_names output for the cell.
inline WeakLabel label_cell(const CellRecord& rec, const std::set<std::string>& calls,
                            const py::CellStats& stats, const SeedTable& seeds) {
    WeakLabel out;
    out.cell_id = rec.cell_id();

    std::vector<std::pair<Stage, int>> fired;  // (stage, rule id)

    for (const std::string& call : calls) {
        auto it = seeds.entries.find(call);
        if (it != seeds.entries.end()) fired.emplace_back(it->second, 1);
    }
    if (stats.code_lines == 1 && !stats.binds_variable) fired.emplace_back(Stage::EXPLORE, 2);
    if (stats.top_statements > 0 && 10 * stats.import_statements > 3 * stats.top_statements)
        fired.emplace_back(Stage::IMPORT, 3);

    if (rec.markdown_context && stats.markdown_words > 0 && stats.markdown_words < 4) {
        std::vector<std::string> words = whitespace_tokens(*rec.markdown_context);
        if (detail::contains_phrase(words, {"logistic", "regression"}) ||
            detail::contains_phrase(words, {"machine", "learning"}) ||
            detail::contains_phrase(words, {"random", "forest"}))
            fired.emplace_back(Stage::MODEL, 4);
        if (detail::contains_phrase(words, {"cross", "validation"}))
            fired.emplace_back(Stage::EVALUATE, 5);
    }

    auto [stage, rules] = resolve_fired(fired);
    out.stage = stage;
    out.fired_rules = std::move(rules);
    return out;
}

// Labels an ordered corpus. Cells are processed per notebook in cell order so
// import aliases accumulate; unparseable cells get UNLABELED with no rules.
inline std::pair<std::vector<WeakLabel>, double> label_corpus(
    const std::vector<CellRecord>& records, const SeedTable& seeds) {
    std::vector<WeakLabel> labels;
    labels.reserve(records.size());
    py::ImportAliasTable table;
    std::string current_notebook;
    size_t covered = 0;

    for (const CellRecord& rec : records) {
        if (rec.notebook_id != current_notebook) {
            table = py::ImportAliasTable{};
            current_notebook = rec.notebook_id;
        }
        WeakLabel label;
        label.cell_id = rec.cell_id();
        try {
            py::AstTree tree = py::parse_cell_ast(rec.source);
            std::set<std::string> calls = py::resolve_call_names(tree, table);
            py::CellStats stats = py::compute_cell_stats(
                rec.source, tree, rec.markdown_context ? *rec.markdown_context : "");
            label = label_cell(rec, calls, stats, seeds);
        } catch (const ParseError&) {
            // unparseable: stays UNLABELED with empty fired_rules
        }
        if (label.stage != Stage::UNLABELED) ++covered;
        labels.push_back(std::move(label));
    }
    double coverage = records.empty() ? 0.0 : static_cast<double>(covered) / static_cast<double>(records.size());
    return {std::move(labels), coverage};
}

// Keep exactly ⌊keep·k⌋ of the k covered labels (selection seeded); the rest
// flip to UNLABELED. keep = 1 is the identity.
inline std::vector<WeakLabel> subsample_supervision(std::vector<WeakLabel> labels, double keep,
                                                    uint64_t seed) {
    if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("keep fraction must be in (0, 1]");
    std::vector<size_t> covered;
    for (size_t i = 0; i < labels.size(); ++i)
        if (labels[i].stage != Stage::UNLABELED) covered.push_back(i);

    // nudge before flooring so keep=0.3 of 10 gives 3, not 2 via 2.999…
    size_t retain = static_cast<size_t>(keep * static_cast<double>(covered.size()) + 1e-9);
    if (retain >= covered.size()) return labels;

    Rng rng(seed_stream(seed, "supervision-subsample"));
    rng.shuffle(covered);
    for (size_t r = retain; r < covered.size(); ++r) {
        labels[covered[r]].stage = Stage::UNLABELED;
        labels[covered[r]].fired_rules.clear();
    }
    return labels;
}

inline nlohmann::json weak_label_to_json(const WeakLabel& label) {
    nlohmann::json j;
    j["cell_id"] = label.cell_id;
    j["stage"] = stage_name(label.stage);
    j["fired_rules"] = label.fired_rules;
    return j;
}

inline WeakLabel weak_label_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("cell_id") || !j.contains("stage"))
        throw SchemaError("weak label missing required fields");
    WeakLabel label;
    label.cell_id = j["cell_id"].get<std::string>();
    label.stage = stage_from_name(j["stage"].get<std::string>());
    if (j.contains("fired_rules"))
        for (const auto& r : j["fired_rules"]) label.fired_rules.insert(r.get<int>());
    return label;
}

}  // namespace coral
