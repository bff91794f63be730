#include <catch2/catch_amalgamated.hpp>

#include <string>
#include <vector>

#include "coral/python_ast.hpp"

using coral::ParseError;
using coral::py::AstTree;
using coral::py::parse_cell_ast;

static std::string dump_of(const std::string& src) { return parse_cell_ast(src).dump(); }

TEST_CASE("simple assignment yields four pre-order nodes") {
    AstTree t = parse_cell_ast("x = 1");
    REQUIRE(t.size() == 4);
    CHECK(t.nodes[0].kind == "module");
    CHECK(t.nodes[1].kind == "assignment");
    CHECK(t.nodes[2].kind == "name");
    CHECK(t.nodes[2].lexeme == "x");
    CHECK(t.nodes[3].kind == "constant");
    CHECK(t.nodes[3].lexeme == "num");
    CHECK(t.nodes[0].parent == -1);
    CHECK(t.nodes[1].parent == 0);
    CHECK(t.nodes[2].parent == 1);
    CHECK(t.nodes[3].parent == 1);
}

TEST_CASE("empty source yields a lone module node") {
    AstTree t = parse_cell_ast("");
    REQUIRE(t.size() == 1);
    CHECK(t.nodes[0].kind == "module");

    AstTree ws = parse_cell_ast("\n\n  \n# only a comment\n");
    REQUIRE(ws.size() == 1);
}

TEST_CASE("import statements carry dotted paths and as-names") {
    AstTree t = parse_cell_ast("import pandas as pd");
    REQUIRE(t.size() == 3);
    CHECK(t.nodes[1].kind == "import");
    CHECK(t.nodes[2].kind == "alias");
    CHECK(t.nodes[2].lexeme == "pandas");
    CHECK(t.nodes[2].aux == "pd");

    AstTree multi = parse_cell_ast("import os, sys\nimport matplotlib.pyplot as plt");
    CHECK(multi.dump() ==
          "module\n"
          "  import\n"
          "    alias os\n"
          "    alias sys\n"
          "  import\n"
          "    alias matplotlib.pyplot\n");

    AstTree from = parse_cell_ast("from sklearn.model_selection import train_test_split as tts");
    REQUIRE(from.size() == 3);
    CHECK(from.nodes[1].kind == "import_from");
    CHECK(from.nodes[1].lexeme == "sklearn.model_selection");
    CHECK(from.nodes[2].lexeme == "train_test_split");
    CHECK(from.nodes[2].aux == "tts");

    AstTree star = parse_cell_ast("from numpy import *");
    CHECK(star.nodes[2].lexeme == "*");
}

TEST_CASE("attribute call chains keep receiver below the attribute node") {
    CHECK(dump_of("df = pd.read_csv(f)") ==
          "module\n"
          "  assignment\n"
          "    name df\n"
          "    call\n"
          "      attribute read_csv\n"
          "        name pd\n"
          "      name f\n");

    CHECK(dump_of("df.dropna().head(5)") ==
          "module\n"
          "  expression_statement\n"
          "    call\n"
          "      attribute head\n"
          "        call\n"
          "          attribute dropna\n"
          "            name df\n"
          "      constant num\n");
}

TEST_CASE("for loop over a call") {
    CHECK(dump_of("for i in range(3):\n    print(i)") ==
          "module\n"
          "  for\n"
          "    name i\n"
          "    call\n"
          "      name range\n"
          "      constant num\n"
          "    expression_statement\n"
          "      call\n"
          "        name print\n"
          "        name i\n");
}

TEST_CASE("function definition with default and return expression") {
    CHECK(dump_of("def f(x, y=2):\n    return x + y") ==
          "module\n"
          "  function_def f\n"
          "    arguments\n"
          "      arg x\n"
          "      arg y\n"
          "        constant num\n"
          "    return\n"
          "      binop +\n"
          "        name x\n"
          "        name y\n");
}

TEST_CASE("elif chains nest under else") {
    CHECK(dump_of("if a:\n    x = 1\nelif b:\n    x = 2\nelse:\n    x = 3") ==
          "module\n"
          "  if\n"
          "    name a\n"
          "    assignment\n"
          "      name x\n"
          "      constant num\n"
          "    else\n"
          "      if\n"
          "        name b\n"
          "        assignment\n"
          "          name x\n"
          "          constant num\n"
          "        else\n"
          "          assignment\n"
          "            name x\n"
          "            constant num\n");
}

TEST_CASE("list comprehension with condition") {
    CHECK(dump_of("xs = [i * 2 for i in range(10) if i % 2 == 0]") ==
          "module\n"
          "  assignment\n"
          "    name xs\n"
          "    listcomp\n"
          "      binop *\n"
          "        name i\n"
          "        constant num\n"
          "      comprehension\n"
          "        name i\n"
          "        call\n"
          "          name range\n"
          "          constant num\n"
          "        compare ==\n"
          "          binop %\n"
          "            name i\n"
          "            constant num\n"
          "          constant num\n");
}

TEST_CASE("constants are tagged by kind not by value") {
    AstTree t = parse_cell_ast("a = 'text'\nb = b'raw'\nc = None\nd = True\ne = 3.5\nf = ...");
    std::vector<std::string> tags;
    for (const auto& n : t.nodes)
        if (n.kind == "constant") tags.push_back(n.lexeme);
    CHECK(tags == std::vector<std::string>{"str", "bytes", "none", "bool", "num", "ellipsis"});
}

TEST_CASE("adjacent string literals fold into one constant") {
    AstTree t = parse_cell_ast("s = 'a' \"b\" 'c'");
    REQUIRE(t.size() == 4);
    CHECK(t.nodes[3].kind == "constant");
    CHECK(t.nodes[3].lexeme == "str");
}

TEST_CASE("f-strings parse as plain string constants") {
    AstTree t = parse_cell_ast("msg = f\"rows: {len(df)}\"");
    REQUIRE(t.size() == 4);
    CHECK(t.nodes[3].lexeme == "str");
}

TEST_CASE("semicolons separate statements on one line") {
    AstTree t = parse_cell_ast("a = 1; b = 2;");
    auto kids = t.children();
    REQUIRE(kids[0].size() == 2);
    CHECK(t.nodes[kids[0][0]].kind == "assignment");
    CHECK(t.nodes[kids[0][1]].kind == "assignment");
}

TEST_CASE("augmented and annotated assignments") {
    CHECK(dump_of("total += x") ==
          "module\n"
          "  aug_assignment +=\n"
          "    name total\n"
          "    name x\n");
    CHECK(dump_of("n: int = 5") ==
          "module\n"
          "  ann_assignment\n"
          "    name n\n"
          "    name int\n"
          "    constant num\n");
}

TEST_CASE("chained assignment keeps every target") {
    CHECK(dump_of("x = y = 0") ==
          "module\n"
          "  assignment\n"
          "    name x\n"
          "    name y\n"
          "    constant num\n");
}

TEST_CASE("tuple unpacking in assignments and loops") {
    CHECK(dump_of("a, b = b, a") ==
          "module\n"
          "  assignment\n"
          "    tuple\n"
          "      name a\n"
          "      name b\n"
          "    tuple\n"
          "      name b\n"
          "      name a\n");
    AstTree t = parse_cell_ast("for k, v in d.items():\n    pass");
    CHECK(t.nodes[2].kind == "tuple");
}

TEST_CASE("comparison chains fold operators into one node") {
    CHECK(dump_of("ok = 0 <= x < n") ==
          "module\n"
          "  assignment\n"
          "    name ok\n"
          "    compare <= <\n"
          "      constant num\n"
          "      name x\n"
          "      name n\n");
    AstTree t = parse_cell_ast("r = a is not b");
    CHECK(t.nodes[3].lexeme == "is not");
    AstTree t2 = parse_cell_ast("r = a not in xs");
    CHECK(t2.nodes[3].lexeme == "not in");
}

TEST_CASE("boolean chains flatten same-operator runs") {
    CHECK(dump_of("r = a and b and c or d") ==
          "module\n"
          "  assignment\n"
          "    name r\n"
          "    boolop or\n"
          "      boolop and\n"
          "        name a\n"
          "        name b\n"
          "        name c\n"
          "      name d\n");
}

TEST_CASE("conditional expression keeps source order of parts") {
    CHECK(dump_of("v = a if cond else b") ==
          "module\n"
          "  assignment\n"
          "    name v\n"
          "    ifexp\n"
          "      name a\n"
          "      name cond\n"
          "      name b\n");
}

TEST_CASE("call argument forms: keyword, star, double star, genexp") {
    CHECK(dump_of("f(x, k=1, *rest, **opts)") ==
          "module\n"
          "  expression_statement\n"
          "    call\n"
          "      name f\n"
          "      name x\n"
          "      keyword k\n"
          "        constant num\n"
          "      starred\n"
          "        name rest\n"
          "      keyword\n"
          "        name opts\n");
    CHECK(dump_of("total = sum(x * x for x in xs)") ==
          "module\n"
          "  assignment\n"
          "    name total\n"
          "    call\n"
          "      name sum\n"
          "      generatorexp\n"
          "        binop *\n"
          "          name x\n"
          "          name x\n"
          "        comprehension\n"
          "          name x\n"
          "          name xs\n");
}

TEST_CASE("subscripts and slices") {
    CHECK(dump_of("v = m[0]") ==
          "module\n"
          "  assignment\n"
          "    name v\n"
          "    subscript\n"
          "      name m\n"
          "      constant num\n");
    CHECK(dump_of("v = xs[1:n:2]") ==
          "module\n"
          "  assignment\n"
          "    name v\n"
          "    subscript\n"
          "      name xs\n"
          "      slice\n"
          "        constant num\n"
          "        name n\n"
          "        constant num\n");
    AstTree t = parse_cell_ast("v = df.iloc[:, 0]");
    CHECK(t.dump() ==
          "module\n"
          "  assignment\n"
          "    name v\n"
          "    subscript\n"
          "      attribute iloc\n"
          "        name df\n"
          "      tuple\n"
          "        slice\n"
          "        constant num\n");
}

TEST_CASE("collections: list set dict and comprehension variants") {
    CHECK(dump_of("d = {'a': 1, 'b': 2}") ==
          "module\n"
          "  assignment\n"
          "    name d\n"
          "    dict\n"
          "      constant str\n"
          "      constant num\n"
          "      constant str\n"
          "      constant num\n");
    AstTree set = parse_cell_ast("s = {1, 2}");
    CHECK(set.nodes[3].kind == "set");
    AstTree dc = parse_cell_ast("d = {k: v for k, v in pairs}");
    CHECK(dc.nodes[3].kind == "dictcomp");
    AstTree sc = parse_cell_ast("s = {x for x in xs}");
    CHECK(sc.nodes[3].kind == "setcomp");
    AstTree empty_tuple = parse_cell_ast("t = ()");
    CHECK(empty_tuple.nodes[3].kind == "tuple");
}

TEST_CASE("lambda walrus decorators classes and context managers") {
    CHECK(dump_of("g = lambda x: x + 1") ==
          "module\n"
          "  assignment\n"
          "    name g\n"
          "    lambda\n"
          "      arguments\n"
          "        arg x\n"
          "      binop +\n"
          "        name x\n"
          "        constant num\n");
    AstTree walrus = parse_cell_ast("if (n := len(xs)) > 3:\n    pass");
    CHECK(walrus.nodes[2].kind == "compare");
    CHECK(walrus.nodes[3].kind == "named_expr");

    CHECK(dump_of("@cached\ndef f():\n    pass") ==
          "module\n"
          "  function_def f\n"
          "    decorator\n"
          "      name cached\n"
          "    arguments\n"
          "    pass\n");

    CHECK(dump_of("class Model(Base):\n    def fit(self):\n        pass") ==
          "module\n"
          "  class_def Model\n"
          "    name Base\n"
          "    function_def fit\n"
          "      arguments\n"
          "        arg self\n"
          "      pass\n");

    CHECK(dump_of("with open(p) as fh:\n    data = fh.read()") ==
          "module\n"
          "  with\n"
          "    with_item\n"
          "      call\n"
          "        name open\n"
          "        name p\n"
          "      name fh\n"
          "    assignment\n"
          "      name data\n"
          "      call\n"
          "        attribute read\n"
          "          name fh\n");
}

TEST_CASE("try except else finally") {
    CHECK(dump_of("try:\n    risky()\nexcept ValueError as e:\n    pass\nelse:\n    pass\n"
                  "finally:\n    done()") ==
          "module\n"
          "  try\n"
          "    expression_statement\n"
          "      call\n"
          "        name risky\n"
          "    except_handler e\n"
          "      name ValueError\n"
          "      pass\n"
          "    else\n"
          "      pass\n"
          "    finally\n"
          "      expression_statement\n"
          "        call\n"
          "          name done\n");
}

TEST_CASE("global nonlocal assert del raise return and yield forms") {
    AstTree t = parse_cell_ast(
        "def g():\n"
        "    global counter\n"
        "    assert counter >= 0, 'bad'\n"
        "    if counter:\n"
        "        raise ValueError('x') from None\n"
        "    yield counter\n"
        "    yield from gen()\n"
        "    del counter\n"
        "    return\n");
    std::string d = t.dump();
    CHECK(d.find("global\n") != std::string::npos);
    CHECK(d.find("assert\n") != std::string::npos);
    CHECK(d.find("raise\n") != std::string::npos);
    CHECK(d.find("yield\n") != std::string::npos);
    CHECK(d.find("yield_from\n") != std::string::npos);
    CHECK(d.find("delete\n") != std::string::npos);
    CHECK(d.find("return\n") != std::string::npos);
}

TEST_CASE("async def await and async for parse") {
    AstTree t = parse_cell_ast(
        "async def fetch(url):\n"
        "    data = await client.get(url)\n"
        "    async for row in data:\n"
        "        print(row)\n");
    CHECK(t.nodes[1].kind == "function_def");
    CHECK(t.nodes[1].aux == "async");
    std::string d = t.dump();
    CHECK(d.find("await\n") != std::string::npos);
    CHECK(d.find("for\n") != std::string::npos);
}

TEST_CASE("unary and power operators") {
    CHECK(dump_of("y = -x ** 2") ==
          "module\n"
          "  assignment\n"
          "    name y\n"
          "    unaryop -\n"
          "      binop **\n"
          "        name x\n"
          "        constant num\n");
    AstTree t = parse_cell_ast("z = not flag");
    CHECK(t.nodes[3].kind == "unaryop");
    CHECK(t.nodes[3].lexeme == "not");
}

TEST_CASE("implicit line joining inside brackets and explicit backslash") {
    AstTree t = parse_cell_ast("xs = [1,\n      2,\n      3]");
    CHECK(t.nodes[3].kind == "list");
    auto kids = t.children();
    CHECK(kids[3].size() == 3);

    AstTree t2 = parse_cell_ast("total = 1 + \\\n    2");
    CHECK(t2.nodes[3].kind == "binop");
}

TEST_CASE("every node has a smaller parent id than its own") {
    const char* snippets[] = {
        "x = 1",
        "import numpy as np\nx = np.zeros(3)",
        "def f(a, *args, **kw):\n    return [y for y in a if y]\n",
        "class C:\n    x: int = 0\n    def m(self):\n        with open('f') as fh:\n"
        "            try:\n                return fh.read()\n            except OSError:\n"
        "                return None\n",
        "while a < b:\n    a, b = b, a % b\nelse:\n    print(a)\n",
    };
    for (const char* src : snippets) {
        AstTree t = parse_cell_ast(src);
        for (size_t i = 1; i < t.size(); ++i) {
            CHECK(t.nodes[i].parent >= 0);
            CHECK(t.nodes[i].parent < static_cast<int>(i));
        }
        CHECK(t.nodes[0].parent == -1);
    }
}

TEST_CASE("syntax errors raise parse errors") {
    CHECK_THROWS_AS(parse_cell_ast("def f(:"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("x = (1"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("x = 'unterminated"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("    x = 1"), ParseError);      // stray indent
    CHECK_THROWS_AS(parse_cell_ast("%matplotlib inline"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("!pip install pandas"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("df.head?"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("for in x:"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("x = = 2"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast("if True\n    pass"), ParseError);
    CHECK_THROWS_AS(parse_cell_ast(")"), ParseError);
}

TEST_CASE("parse errors carry line information") {
    try {
        parse_cell_ast("x = 1\ny = (\nz]");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line >= 1);
        CHECK(std::string(e.what()).size() > 0);
    }
}

TEST_CASE("graph labels prefer lexemes and fall back to kinds") {
    AstTree t = parse_cell_ast("x = 1");
    CHECK(t.label(0) == "module");
    CHECK(t.label(1) == "assignment");
    CHECK(t.label(2) == "x");
    CHECK(t.label(3) == "num");
}
