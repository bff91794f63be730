#include <catch2/catch_amalgamated.hpp>

#include <bit>
#include <cmath>

#include "coral/grad_check.hpp"
#include "coral/model.hpp"
#include "coral/objectives.hpp"

using namespace coral;

namespace {

ModelConfig toy_config() {
    ModelConfig c;
    c.d_model = 8;
    c.heads = 2;
    c.layers = 1;
    c.d_k = 4;
    c.d_v = 4;
    c.topics = 4;
    c.max_nodes = 40;
    return c;
}

EncodedGraph random_graph(Rng& rng, size_t vocab_size, size_t max_n = 10) {
    size_t n = 2 + rng.next_index(max_n - 1);
    EncodedGraph g;
    g.cell_id = "t:0";
    g.token_ids.push_back(kClsId);
    for (size_t i = 1; i < n; ++i) {
        g.token_ids.push_back(static_cast<int>(rng.next_index(vocab_size)));
    }
    g.adj_self.assign(n * n, 0);
    for (size_t i = 0; i < n; ++i) {
        g.adj_self[i * n + i] = 1;
        g.adj_self[i] = 1;  // CLS reaches everything
        g.adj_self[i * n] = 1;
    }
    for (size_t i = 1; i < n; ++i) {
        for (size_t j = i + 1; j < n; ++j) {
            if (rng.next_double() < 0.3) {
                g.adj_self[i * n + j] = 1;
                g.adj_self[j * n + i] = 1;
            }
        }
    }
    return g;
}

bool is_positive_zero(double v) { return std::bit_cast<uint64_t>(v) == 0; }

}  // namespace

TEST_CASE("encoder output shapes follow the config") {
    ModelConfig cfg = toy_config();
    auto params = ModelParams<double>::init(cfg, 30, 1);
    Rng rng(2);
    EncodedGraph g = random_graph(rng, 30);
    EncoderOut<double> out = encoder_forward(g, params);
    CHECK(out.nodes.value().rows() == g.n());
    CHECK(out.nodes.value().cols() == cfg.d_model);
    CHECK(out.z.value().rows() == 1);
    CHECK(out.z.value().cols() == cfg.d_model);
}

TEST_CASE("attention never crosses missing edges") {
    ModelConfig cfg = toy_config();
    cfg.layers = 2;
    auto params = ModelParams<double>::init(cfg, 40, 3);
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        EncodedGraph g = random_graph(rng, 40);
        AttentionProbe<double> probe;
        encoder_forward(g, params, &probe);
        REQUIRE(probe.weights.size() == cfg.layers * cfg.heads);
        size_t n = g.n();
        for (const auto& attn : probe.weights) {
            REQUIRE(attn.rows() == n);
            for (size_t i = 0; i < n; ++i) {
                double row_sum = 0;
                for (size_t j = 0; j < n; ++j) {
                    double w = attn.at(i, j);
                    if (!g.a_tilde(i, j)) {
                        CHECK(is_positive_zero(w));
                    }
                    row_sum += w;
                }
                CHECK(std::fabs(row_sum - 1.0) < 1e-9);
            }
        }
    }
}

TEST_CASE("permuting non-CLS nodes leaves the readout unchanged") {
    ModelConfig cfg = toy_config();
    auto params = ModelParams<double>::init(cfg, 40, 5);
    Rng rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        EncodedGraph g = random_graph(rng, 40);
        size_t n = g.n();
        std::vector<size_t> perm(n);
        for (size_t i = 0; i < n; ++i) perm[i] = i;
        if (n > 2) {
            std::vector<size_t> tail(perm.begin() + 1, perm.end());
            rng.shuffle(tail);
            std::copy(tail.begin(), tail.end(), perm.begin() + 1);
        }
        EncodedGraph p;
        p.cell_id = g.cell_id;
        p.token_ids.resize(n);
        p.adj_self.assign(n * n, 0);
        for (size_t i = 0; i < n; ++i) {
            p.token_ids[i] = g.token_ids[perm[i]];
            for (size_t j = 0; j < n; ++j) {
                p.adj_self[i * n + j] = g.adj_self[perm[i] * n + perm[j]];
            }
        }
        Tensor<double> z0 = encoder_forward(g, params).z.value();
        Tensor<double> z1 = encoder_forward(p, params).z.value();
        double max_diff = 0;
        for (size_t j = 0; j < z0.numel(); ++j) {
            max_diff = std::max(max_diff, std::fabs(z0.data()[j] - z1.data()[j]));
        }
        CHECK(max_diff < 1e-6);
    }
}

TEST_CASE("topic head is a softmax over K") {
    ModelConfig cfg = toy_config();
    cfg.topics = 50;
    auto params = ModelParams<double>::with_shapes(cfg, 10);
    Var<double> z = Var<double>::constant(Tensor<double>(1, cfg.d_model, 0.37));

    // zero weights and bias: exactly uniform
    Var<double> p = topic_head(z, params);
    for (size_t j = 0; j < 50; ++j) CHECK(p.value().at(0, j) == 1.0 / 50);

    // a dominant bias wins
    params.topic_b.mutable_value().at(0, 0) = 10.0;
    Var<double> p2 = topic_head(z, params);
    CHECK(p2.value().at(0, 0) > 0.99);

    // random heads stay on the simplex
    auto rp = ModelParams<double>::init(cfg, 10, 9);
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        Tensor<double> zt(1, cfg.d_model);
        fill_uniform(zt, rng, -2.0, 2.0);
        Var<double> pt = topic_head(Var<double>::constant(zt), rp);
        double sum = 0;
        for (size_t j = 0; j < 50; ++j) {
            CHECK(pt.value().at(0, j) >= 0.0);
            sum += pt.value().at(0, j);
        }
        CHECK(std::fabs(sum - 1.0) < 1e-9);
    }
}

TEST_CASE("stage head maps topics to six stages") {
    ModelConfig cfg = toy_config();
    auto params = ModelParams<double>::with_shapes(cfg, 10);
    Var<double> uniform_topic =
        Var<double>::constant(Tensor<double>(1, cfg.topics, 1.0 / static_cast<double>(cfg.topics)));
    Var<double> p = stage_head(uniform_topic, params);
    for (size_t j = 0; j < 6; ++j) CHECK(p.value().at(0, j) == 1.0 / 6);

    // one-hot topic selects a column of the stage map
    auto rp = ModelParams<double>::init(cfg, 10, 4);
    Tensor<double> one_hot(1, cfg.topics, 0.0);
    one_hot.at(0, 2) = 1.0;
    Var<double> ps = stage_head(Var<double>::constant(one_hot), rp);
    Tensor<double> logits(1, 6);
    for (size_t s = 0; s < 6; ++s) {
        logits.at(0, s) = rp.stage_w.value().at(s, 2) + rp.stage_b.value().at(0, s);
    }
    Var<double> expect = ad::softmax_rows(Var<double>::constant(logits));
    for (size_t s = 0; s < 6; ++s) {
        CHECK(ps.value().at(0, s) == Catch::Approx(expect.value().at(0, s)).margin(1e-12));
    }
}

TEST_CASE("prediction restricts the argmax to real stages") {
    CHECK(pick_stage({0.10, 0.30, 0.20, 0.15, 0.15, 0.10}) == Stage::WRANGLE);
    CHECK(pick_stage({0.06, 0.01, 0.01, 0.01, 0.01, 0.90}) == Stage::IMPORT);
    CHECK(pick_stage({0.01, 0.01, 0.02, 0.03, 0.03, 0.90}) == Stage::MODEL);  // tie → lower index
}

TEST_CASE("predict_record is deterministic and never emits UNLABELED") {
    std::vector<CellGraph> corpus = {
        build_cell_graph(py::parse_cell_ast("df = pd.read_csv(f)"), "load data", 40),
        build_cell_graph(py::parse_cell_ast("model.fit(X, y)"), "", 40)};
    Vocabulary vocab = build_vocabulary(corpus, 1);
    ModelConfig cfg = toy_config();
    auto params = ModelParams<double>::init(cfg, vocab.size(), 11);

    CellRecord rec;
    rec.notebook_id = "nb";
    rec.cell_index = 0;
    rec.source = "df = pd.read_csv(f)";
    rec.markdown_context = "load data";

    StagePrediction a = predict_record(rec, vocab, params);
    StagePrediction b = predict_record(rec, vocab, params);
    REQUIRE(a.p_stage.size() == 6);
    for (size_t j = 0; j < 6; ++j) CHECK(a.p_stage[j] == b.p_stage[j]);
    CHECK(a.predicted != Stage::UNLABELED);
    CHECK(a.cell_id == "nb:0");
    double sum = 0;
    for (double v : a.p_stage) sum += v;
    CHECK(std::fabs(sum - 1.0) < 1e-9);

    CellRecord bad = rec;
    bad.source = "def f(:";
    size_t skipped = 0;
    auto preds = predict_records({rec, bad}, vocab, params, &skipped);
    CHECK(preds.size() == 1);
    CHECK(skipped == 1);
}

TEST_CASE("a graph already within the node budget is untouched by truncation") {
    py::AstTree tree = py::parse_cell_ast("df = pd.read_csv(f)\ndf.head()");
    CellGraph big = build_cell_graph(tree, "peek at data", 160);
    CellGraph tight = build_cell_graph(tree, "peek at data", big.n());
    REQUIRE(big.n() == tight.n());
    for (size_t i = 0; i < big.n(); ++i) {
        CHECK(big.nodes[i].label == tight.nodes[i].label);
        for (size_t j = 0; j < big.n(); ++j) CHECK(big.a(i, j) == tight.a(i, j));
    }
}

TEST_CASE("encoder rejects malformed inputs") {
    ModelConfig cfg = toy_config();
    auto params = ModelParams<double>::init(cfg, 10, 1);

    EncodedGraph empty;
    CHECK_THROWS_AS(encoder_forward(empty, params), ShapeError);

    Rng rng(3);
    EncodedGraph oversized = random_graph(rng, 10);
    ModelConfig small = cfg;
    small.max_nodes = 2;
    auto small_params = ModelParams<double>::init(small, 10, 1);
    if (oversized.n() > 2) {
        CHECK_THROWS_AS(encoder_forward(oversized, small_params), ShapeError);
    }

    EncodedGraph bad_id = random_graph(rng, 10);
    bad_id.token_ids[1] = 99;
    CHECK_THROWS_AS(encoder_forward(bad_id, params), ShapeError);
}

TEST_CASE("model config validation") {
    ModelConfig c;
    c.validate();  // defaults are sound
    CHECK(c.d_model == 256);
    CHECK(c.heads == 4);
    CHECK(c.layers == 4);
    CHECK(c.d_k == 64);
    CHECK(c.d_v == 64);
    CHECK(c.topics == 50);
    CHECK(c.max_nodes == 160);
    CHECK(c.n_stages == 6);

    ModelConfig odd = c;
    odd.heads = 3;
    CHECK_THROWS_AS(odd.validate(), ConfigError);
    ModelConfig few = c;
    few.topics = 0;
    CHECK_THROWS_AS(few.validate(), ConfigError);
    ModelConfig bad_stages = c;
    bad_stages.n_stages = 5;
    CHECK_THROWS_AS(bad_stages.validate(), ConfigError);
    ModelConfig zero = c;
    zero.d_model = 0;
    CHECK_THROWS_AS(zero.validate(), ConfigError);
}

TEST_CASE("parameter init is seed-stable") {
    ModelConfig cfg = toy_config();
    auto a = ModelParams<double>::init(cfg, 20, 42);
    auto b = ModelParams<double>::init(cfg, 20, 42);
    auto c = ModelParams<double>::init(cfg, 20, 43);
    auto av = a.all(), bv = b.all(), cv = c.all();
    bool any_diff_seed43 = false;
    for (size_t i = 0; i < av.size(); ++i) {
        REQUIRE(av[i].name() == bv[i].name());
        REQUIRE(av[i].value().numel() == bv[i].value().numel());
        for (size_t j = 0; j < av[i].value().numel(); ++j) {
            CHECK(av[i].value().data()[j] == bv[i].value().data()[j]);
            if (av[i].value().data()[j] != cv[i].value().data()[j]) any_diff_seed43 = true;
        }
    }
    CHECK(any_diff_seed43);

    // biases zero, layer norm scales one
    for (auto& v : av) {
        if (v.name().ends_with("beta") || v.name().ends_with(".b1") || v.name().ends_with(".b2") ||
            v.name().ends_with("topic.b") || v.name().ends_with("stage.b")) {
            for (double x : v.value().data()) CHECK(x == 0.0);
        }
        if (v.name().ends_with("gamma")) {
            for (double x : v.value().data()) CHECK(x == 1.0);
        }
    }
}

TEST_CASE("full model gradient check on a toy config") {
    ModelConfig cfg = toy_config();
    auto params = ModelParams<double>::init(cfg, 15, 21);
    Rng graph_rng(77);
    EncodedGraph g0 = random_graph(graph_rng, 15, 6);
    EncodedGraph g1 = random_graph(graph_rng, 15, 6);

    auto f = [&]() {
        std::vector<Var<double>> z, pt, ps;
        for (const EncodedGraph* g : {&g0, &g1}) {
            EncoderOut<double> out = encoder_forward(*g, params);
            Var<double> topic = topic_head(out.z, params);
            z.push_back(out.z);
            pt.push_back(topic);
            ps.push_back(stage_head(topic, params));
        }
        Rng neg_rng(5);
        LossWeights w;
        return total_loss(z, ps, pt, {Stage::WRANGLE, Stage::UNLABELED}, params.recon_r, w, 5,
                          neg_rng, true, nullptr)
            .total;
    };
    auto rep = grad_check<double>(f, params.all(), 1e-5);
    INFO("worst " << rep.worst_param << "[" << rep.worst_coord << "] analytic "
                  << rep.worst_analytic << " numeric " << rep.worst_numeric);
    CHECK(rep.max_rel_err < 1e-3);
}
