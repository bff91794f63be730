#include <catch2/catch_amalgamated.hpp>

#include <set>
#include <string>

#include "coral/call_resolution.hpp"

using coral::py::AstTree;
using coral::py::CellStats;
using coral::py::compute_cell_stats;
using coral::py::ImportAliasTable;
using coral::py::parse_cell_ast;
using coral::py::resolve_call_names;

static std::set<std::string> calls_in(const std::string& src, ImportAliasTable& table) {
    AstTree tree = parse_cell_ast(src);
    return resolve_call_names(tree, table);
}

static std::set<std::string> calls_in(const std::string& src) {
    ImportAliasTable table;
    return calls_in(src, table);
}

TEST_CASE("module alias expands to the full package path") {
    ImportAliasTable t;
    calls_in("import pandas as pd", t);
    auto calls = calls_in("pd.read_csv(f)", t);
    CHECK(calls == std::set<std::string>{"pandas.read_csv"});
}

TEST_CASE("from-import binds the target name to the qualified function") {
    ImportAliasTable t;
    calls_in("from sklearn.linear_model import LinearRegression", t);
    auto calls = calls_in("LinearRegression()", t);
    CHECK(calls == std::set<std::string>{"sklearn.linear_model.LinearRegression"});
}

TEST_CASE("one-step chain through an assigned variable") {
    ImportAliasTable t;
    auto calls = calls_in("import pandas as pd\ndf = pd.read_csv(f)\ndf.dropna()", t);
    CHECK(calls.count("pandas.read_csv") == 1);
    CHECK(calls.count("pandas.read_csv.dropna") == 1);
}

TEST_CASE("direct chaining on a call result") {
    ImportAliasTable t;
    calls_in("import pandas as pd", t);
    auto calls = calls_in("pd.read_csv(f).dropna()", t);
    CHECK(calls == std::set<std::string>{"pandas.read_csv", "pandas.read_csv.dropna"});
}

TEST_CASE("chains do not extend past one assignment step") {
    ImportAliasTable t;
    auto calls = calls_in(
        "import pandas as pd\n"
        "df = pd.read_csv(f)\n"
        "clean = df.dropna()\n"
        "clean.describe()\n",
        t);
    CHECK(calls.count("pandas.read_csv.dropna") == 1);
    // `clean` came from a var-rooted call, so calls on it resolve to nothing
    CHECK(calls.count("pandas.read_csv.dropna.describe") == 0);
    for (const auto& c : calls) CHECK(c.find("describe") == std::string::npos);
}

TEST_CASE("bare import binds the top-level package name") {
    ImportAliasTable t;
    auto calls = calls_in("import matplotlib.pyplot\nmatplotlib.pyplot.show()", t);
    CHECK(calls == std::set<std::string>{"matplotlib.pyplot.show"});
}

TEST_CASE("from-import with as-name") {
    ImportAliasTable t;
    auto calls = calls_in(
        "from sklearn.model_selection import train_test_split as tts\n"
        "a, b = tts(X, y)\n",
        t);
    CHECK(calls == std::set<std::string>{"sklearn.model_selection.train_test_split"});
}

TEST_CASE("rebinding a name shadows the earlier import") {
    ImportAliasTable t;
    calls_in("import pandas as pd", t);
    calls_in("pd = 5", t);
    auto calls = calls_in("pd.read_csv(f)", t);
    CHECK(calls.empty());
}

TEST_CASE("later import shadows a variable of the same name") {
    ImportAliasTable t;
    calls_in("import pandas as pd\nnp = pd.read_csv(f)", t);
    calls_in("import numpy as np", t);
    auto calls = calls_in("np.zeros(3)", t);
    CHECK(calls == std::set<std::string>{"numpy.zeros"});
}

TEST_CASE("del and def and for targets shadow bindings") {
    ImportAliasTable t;
    calls_in("import pandas as pd\nimport numpy as np\nimport scipy as sp", t);
    calls_in("del pd", t);
    calls_in("def np():\n    pass", t);
    calls_in("for sp in range(3):\n    pass", t);
    CHECK(calls_in("pd.read_csv(f)", t).empty());
    CHECK(calls_in("np.zeros(1)", t).empty());
    CHECK(calls_in("sp.io.loadmat(p)", t).empty());
}

TEST_CASE("imports nested inside try blocks still register") {
    ImportAliasTable t;
    calls_in("try:\n    import xgboost as xgb\nexcept ImportError:\n    pass", t);
    auto calls = calls_in("m = xgb.XGBClassifier()", t);
    CHECK(calls == std::set<std::string>{"xgboost.XGBClassifier"});
}

TEST_CASE("same-cell import is visible to later statements in the cell") {
    auto calls = calls_in("import seaborn as sns\nsns.heatmap(corr)");
    CHECK(calls == std::set<std::string>{"seaborn.heatmap"});
}

TEST_CASE("statement order matters within a cell") {
    // call happens before the import: nothing to resolve yet
    auto calls = calls_in("sns.heatmap(corr)\nimport seaborn as sns");
    CHECK(calls.empty());
}

TEST_CASE("unresolvable receivers yield no names") {
    ImportAliasTable t;
    auto calls = calls_in("foo.bar(1)\nbaz()\nxs[0].fit()", t);
    CHECK(calls.empty());
}

TEST_CASE("calls inside function bodies and comprehensions are collected") {
    ImportAliasTable t;
    calls_in("import numpy as np", t);
    auto calls = calls_in(
        "def prep(rows):\n"
        "    return [np.sqrt(r) for r in rows]\n",
        t);
    CHECK(calls == std::set<std::string>{"numpy.sqrt"});
}

TEST_CASE("adding imports never removes resolutions") {
    ImportAliasTable a;
    auto before = calls_in("import pandas as pd\npd.read_csv(f)", a);
    ImportAliasTable b;
    auto after = calls_in("import numpy as onp\nimport pandas as pd\npd.read_csv(f)", b);
    for (const auto& c : before) CHECK(after.count(c) == 1);
}

TEST_CASE("relative imports resolve to nothing") {
    ImportAliasTable t;
    calls_in("from . import helpers", t);
    CHECK(calls_in("helpers.run()", t).empty());
}

TEST_CASE("cell statistics count lines statements imports and bindings") {
    std::string src =
        "import os\n"
        "# just a comment\n"
        "\n"
        "x = os.getcwd()\n"
        "print(x)\n";
    AstTree tree = parse_cell_ast(src);
    CellStats s = compute_cell_stats(src, tree, "Load the data");
    CHECK(s.code_lines == 3);
    CHECK(s.top_statements == 3);
    CHECK(s.import_statements == 1);
    CHECK(s.binds_variable);
    CHECK(s.markdown_words == 3);
}

TEST_CASE("single bare expression line binds nothing") {
    std::string src = "df.head()  # peek at the table\n";
    AstTree tree = parse_cell_ast(src);
    CellStats s = compute_cell_stats(src, tree, "");
    CHECK(s.code_lines == 1);
    CHECK(s.top_statements == 1);
    CHECK_FALSE(s.binds_variable);
    CHECK(s.markdown_words == 0);
}

TEST_CASE("for and with-as count as variable bindings") {
    std::string loop = "for row in rows:\n    print(row)\n";
    AstTree t1 = parse_cell_ast(loop);
    CHECK(compute_cell_stats(loop, t1, "").binds_variable);

    std::string ctx = "with open(p) as fh:\n    fh.read()\n";
    AstTree t2 = parse_cell_ast(ctx);
    CHECK(compute_cell_stats(ctx, t2, "").binds_variable);

    std::string bare_with = "with lock:\n    work()\n";
    AstTree t3 = parse_cell_ast(bare_with);
    CHECK_FALSE(compute_cell_stats(bare_with, t3, "").binds_variable);
}

TEST_CASE("markdown word counting strips punctuation") {
    std::string src = "pass\n";
    AstTree tree = parse_cell_ast(src);
    CHECK(compute_cell_stats(src, tree, "## **Random Forest!**").markdown_words == 2);
    CHECK(compute_cell_stats(src, tree, "   ").markdown_words == 0);
}
