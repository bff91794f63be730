#pragma once

// Deterministic synthetic notebooks for training and coverage tests. Each
// notebook opens with an import prelude (which also registers the aliases the
// later cells call through); the remaining cells are drawn from rule-firing
// stage templates or multi-line filler, so the heuristic labeler covers
// roughly `covered` of the non-prelude cells and leaves the rest UNLABELED.

#include <initializer_list>
#include <string>
#include <vector>

#include "coral/common.hpp"
#include "coral/ipynb.hpp"

namespace coral_test {

namespace synth_detail {

inline const char* pick(coral::Rng& rng, std::initializer_list<const char*> options) {
    return options.begin()[rng.next_index(options.size())];
}

inline std::string stem(coral::Rng& rng) {
    return pick(rng, {"churn", "sales", "housing", "wine", "users", "events", "logs", "trips"});
}

inline std::string var(coral::Rng& rng) {
    return pick(rng, {"df", "data", "frame", "raw", "table", "sample"});
}

inline std::string col(coral::Rng& rng) {
    return pick(rng, {"age", "price", "score", "count", "value", "rate", "total"});
}

struct SynthCell {
    std::string source;
    std::string markdown;  // empty = no markdown context
};

inline SynthCell prelude_cell(coral::Rng& rng) {
    SynthCell c;
    switch (rng.next_index(3)) {
        case 0:
            c.source =
                "import pandas as pd\nimport numpy as np\n"
                "from sklearn.linear_model import LogisticRegression\n"
                "from sklearn.metrics import accuracy_score\n"
                "import seaborn as sns";
            break;
        case 1:
            c.source =
                "import pandas as pd\nimport matplotlib.pyplot as plt\n"
                "from sklearn.svm import SVC\n"
                "from sklearn.metrics import accuracy_score";
            break;
        default:
            c.source =
                "import numpy as np\nimport pandas as pd\n"
                "from sklearn.ensemble import RandomForestClassifier\n"
                "from sklearn.metrics import mean_squared_error\n"
                "import matplotlib.pyplot as plt";
            break;
    }
    return c;
}

inline SynthCell wrangle_cell(coral::Rng& rng) {
    SynthCell c;
    std::string v = var(rng), s = stem(rng);
    switch (rng.next_index(3)) {
        case 0:
            c.source = v + " = pd.read_csv('" + s + ".csv')";
            break;
        case 1:
            c.source = v + " = pd.read_csv('" + s + ".csv')\n" + v + " = " + v + ".dropna()";
            break;
        default:
            c.source = v + " = pd.read_csv('" + s + ".csv')\n" + v + "['" + col(rng) + "'] = " +
                       v + "['" + col(rng) + "'].fillna(0)";
            break;
    }
    return c;
}

inline SynthCell explore_cell(coral::Rng& rng) {
    SynthCell c;
    std::string v = var(rng);
    switch (rng.next_index(4)) {
        case 0:
            c.source = v + ".head()";
            break;
        case 1:
            c.source = std::string("print(") + v + ".shape)";
            break;
        case 2:
            c.source = std::string("plt.plot(") + col(rng) + "_values)\nplt.show()";
            break;
        default:
            c.source = std::string("sns.heatmap(") + v + ".corr())";
            break;
    }
    return c;
}

inline SynthCell model_cell(coral::Rng& rng) {
    SynthCell c;
    switch (rng.next_index(4)) {
        case 0:
            c.source = "model = LogisticRegression()\nmodel.fit(X_train, y_train)";
            break;
        case 1:
            c.source = "clf = SVC(C=1.0)\nclf.fit(X_train, y_train)";
            break;
        case 2:
            c.source = "forest = RandomForestClassifier(n_estimators=50)\nforest.fit(X, y)";
            break;
        default:
            c.source = std::string("model = fit_baseline(X_train, y_train)");
            c.markdown = pick(rng, {"Logistic regression", "Random forest", "Machine learning"});
            break;
    }
    return c;
}

inline SynthCell evaluate_cell(coral::Rng& rng) {
    SynthCell c;
    switch (rng.next_index(3)) {
        case 0:
            c.source = "acc = accuracy_score(y_test, preds)";
            break;
        case 1:
            c.source = "err = mean_squared_error(y_test, preds)\nprint(err)";
            break;
        default:
            c.source = "fold_scores = run_folds(model, X, y)";
            c.markdown = "Cross validation";
            break;
    }
    return c;
}

inline SynthCell filler_cell(coral::Rng& rng) {
    SynthCell c;
    std::string v = col(rng);
    switch (rng.next_index(4)) {
        case 0:
            c.source = "total = 0\nfor row in rows:\n    total += row." + v +
                       "\nmean_" + v + " = total / len(rows)";
            break;
        case 1:
            c.source = "def scale_" + v + "(xs):\n    top = max(xs)\n    return [x / top for x in xs]\n" +
                       v + "_scaled = scale_" + v + "(" + v + "_raw)";
            break;
        case 2:
            c.source = "result = {}\nfor key in groups:\n    result[key] = summarize(groups[key], '" +
                       v + "')";
            break;
        default:
            c.source = "threshold = 0.5\nflags = [x > threshold for x in " + v +
                       "_list]\nkept = sum(flags)";
            break;
    }
    if (rng.next_double() < 0.2) c.markdown = "Helper block for the " + v + " pipeline step";
    return c;
}

}  // namespace synth_detail

// `covered` is the chance a non-prelude cell uses a rule-firing template.
inline std::vector<coral::CellRecord> synthetic_corpus(size_t n_cells, uint64_t seed,
                                                       double covered = 0.10) {
    using namespace synth_detail;
    coral::Rng rng(coral::seed_stream(seed, "synthetic-corpus"));
    std::vector<coral::CellRecord> records;
    records.reserve(n_cells);
    size_t notebook = 0;
    while (records.size() < n_cells) {
        std::string nb_id = "syn/nb" + std::to_string(notebook++);
        size_t in_nb = 6 + rng.next_index(5);  // 6..10 cells
        int index = 0;
        for (size_t i = 0; i < in_nb && records.size() < n_cells; ++i) {
            SynthCell cell;
            if (i == 0) {
                cell = prelude_cell(rng);
            } else if (rng.next_double() < covered) {
                switch (rng.next_index(4)) {
                    case 0: cell = wrangle_cell(rng); break;
                    case 1: cell = explore_cell(rng); break;
                    case 2: cell = model_cell(rng); break;
                    default: cell = evaluate_cell(rng); break;
                }
            } else {
                cell = filler_cell(rng);
            }
            coral::CellRecord rec;
            rec.notebook_id = nb_id;
            if (!cell.markdown.empty()) {
                ++index;  // the markdown cell occupies the previous slot
                rec.markdown_context = cell.markdown;
                rec.markdown_distance = 1;
            }
            rec.cell_index = index++;
            rec.source = cell.source;
            records.push_back(std::move(rec));
        }
    }
    return records;
}

}  // namespace coral_test
