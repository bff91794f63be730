#pragma once

#include <string>
#include <vector>

#include "coral/autodiff.hpp"
#include "coral/cell_graph.hpp"
#include "coral/ipynb.hpp"
#include "coral/python_ast.hpp"
#include "coral/stage.hpp"
#include "coral/vocab.hpp"

#include "json.hpp"

namespace coral {

struct ModelConfig {
    size_t d_model = 256;
    size_t heads = 4;
    size_t layers = 4;
    size_t d_k = 64;
    size_t d_v = 64;
    size_t topics = 50;
    size_t max_nodes = 160;
    size_t n_stages = 6;

    void validate() const {
        if (d_model == 0 || heads == 0 || layers == 0 || d_k == 0 || d_v == 0 || topics == 0 ||
            max_nodes == 0) {
            throw ConfigError("model dimensions must be positive");
        }
        if (d_model % heads != 0) {
            throw ConfigError("d_model " + std::to_string(d_model) + " not divisible by heads " +
                              std::to_string(heads));
        }
        if (n_stages != static_cast<size_t>(kNumStages)) {
            throw ConfigError("n_stages must be 6 (five stages plus UNLABELED)");
        }
    }

    bool operator==(const ModelConfig&) const = default;
};

inline void model_config_to_json(const ModelConfig& c, nlohmann::json& j) {
    j["d_model"] = c.d_model;
    j["heads"] = c.heads;
    j["layers"] = c.layers;
    j["d_k"] = c.d_k;
    j["d_v"] = c.d_v;
    j["topics"] = c.topics;
    j["max_nodes"] = c.max_nodes;
    j["n_stages"] = c.n_stages;
}

// Unknown keys are the caller's concern; absent d_k/d_v default to
// d_model/heads.
inline void model_config_from_json(const nlohmann::json& j, ModelConfig& c) {
    c.d_model = j.value("d_model", c.d_model);
    c.heads = j.value("heads", c.heads);
    c.layers = j.value("layers", c.layers);
    c.d_k = j.value("d_k", c.d_model / std::max<size_t>(c.heads, 1));
    c.d_v = j.value("d_v", c.d_model / std::max<size_t>(c.heads, 1));
    c.topics = j.value("topics", c.topics);
    c.max_nodes = j.value("max_nodes", c.max_nodes);
    c.n_stages = j.value("n_stages", c.n_stages);
}

// All learned tensors, held as parameter leaves shared by every forward
// graph. Declaration order here is the canonical ordering for checkpoints
// and the optimizer.
template <typename S>
struct ModelParams {
    struct Head {
        Var<S> wq, wk, wv;
    };
    struct Layer {
        std::vector<Head> heads;
        Var<S> wo;
        Var<S> ln1_gamma, ln1_beta;
        Var<S> ffn_w1, ffn_b1, ffn_w2, ffn_b2;
        Var<S> ln2_gamma, ln2_beta;
    };

    ModelConfig config;
    Var<S> embedding;  // |vocab| × d_model
    std::vector<Layer> layers;
    Var<S> topic_w, topic_b;  // K × d_model, 1 × K
    Var<S> stage_w, stage_b;  // n_stages × K, 1 × n_stages
    Var<S> recon_r;           // d_model × K

    std::vector<Var<S>> all() const {
        std::vector<Var<S>> out;
        out.push_back(embedding);
        for (const auto& layer : layers) {
            for (const auto& h : layer.heads) {
                out.push_back(h.wq);
                out.push_back(h.wk);
                out.push_back(h.wv);
            }
            out.push_back(layer.wo);
            out.push_back(layer.ln1_gamma);
            out.push_back(layer.ln1_beta);
            out.push_back(layer.ffn_w1);
            out.push_back(layer.ffn_b1);
            out.push_back(layer.ffn_w2);
            out.push_back(layer.ffn_b2);
            out.push_back(layer.ln2_gamma);
            out.push_back(layer.ln2_beta);
        }
        out.push_back(topic_w);
        out.push_back(topic_b);
        out.push_back(stage_w);
        out.push_back(stage_b);
        out.push_back(recon_r);
        return out;
    }

    size_t vocab_rows() const { return embedding.value().rows(); }

    // Fresh zero-valued parameters of the right shapes (checkpoint loading).
    static ModelParams with_shapes(const ModelConfig& cfg, size_t vocab_size) {
        cfg.validate();
        ModelParams p;
        p.config = cfg;
        auto mk = [](size_t r, size_t c, std::string name) {
            return Var<S>::param(Tensor<S>(r, c), std::move(name));
        };
        p.embedding = mk(vocab_size, cfg.d_model, "embedding");
        size_t ffn_hidden = cfg.heads * cfg.d_model;
        for (size_t l = 0; l < cfg.layers; ++l) {
            std::string lp = "layer" + std::to_string(l) + ".";
            Layer layer;
            for (size_t h = 0; h < cfg.heads; ++h) {
                std::string hp = lp + "head" + std::to_string(h) + ".";
                layer.heads.push_back({mk(cfg.d_model, cfg.d_k, hp + "wq"),
                                       mk(cfg.d_model, cfg.d_k, hp + "wk"),
                                       mk(cfg.d_model, cfg.d_v, hp + "wv")});
            }
            layer.wo = mk(cfg.heads * cfg.d_v, cfg.d_model, lp + "wo");
            layer.ln1_gamma = mk(1, cfg.d_model, lp + "ln1.gamma");
            layer.ln1_beta = mk(1, cfg.d_model, lp + "ln1.beta");
            layer.ffn_w1 = mk(ffn_hidden, cfg.d_model, lp + "ffn.w1");
            layer.ffn_b1 = mk(1, ffn_hidden, lp + "ffn.b1");
            layer.ffn_w2 = mk(cfg.d_model, ffn_hidden, lp + "ffn.w2");
            layer.ffn_b2 = mk(1, cfg.d_model, lp + "ffn.b2");
            layer.ln2_gamma = mk(1, cfg.d_model, lp + "ln2.gamma");
            layer.ln2_beta = mk(1, cfg.d_model, lp + "ln2.beta");
            p.layers.push_back(std::move(layer));
        }
        p.topic_w = mk(cfg.topics, cfg.d_model, "topic.w");
        p.topic_b = mk(1, cfg.topics, "topic.b");
        p.stage_w = mk(cfg.n_stages, cfg.topics, "stage.w");
        p.stage_b = mk(1, cfg.n_stages, "stage.b");
        p.recon_r = mk(cfg.d_model, cfg.topics, "recon.r");
        return p;
    }

    // Glorot-uniform weights, zero biases, identity layer norms. Seeded and
    // order-stable, so the same seed always yields the same model.
    static ModelParams init(const ModelConfig& cfg, size_t vocab_size, uint64_t seed) {
        ModelParams p = with_shapes(cfg, vocab_size);
        Rng rng(seed_stream(seed, "model-init"));
        for (auto& v : p.all()) {
            Tensor<S>& t = v.mutable_value();
            const std::string& name = v.name();
            bool is_bias = name.ends_with(".b") || name.ends_with(".b1") || name.ends_with(".b2") ||
                           name.ends_with("beta") || name == "stage.b" || name == "topic.b";
            bool is_gamma = name.ends_with("gamma");
            if (is_gamma) {
                for (S& x : t.data()) x = S(1);
            } else if (is_bias) {
                t.zero();
            } else {
                double limit = std::sqrt(6.0 / static_cast<double>(t.rows() + t.cols()));
                fill_uniform(t, rng, -limit, limit);
            }
        }
        return p;
    }

    ModelParams clone() const {
        ModelParams p = with_shapes(config, vocab_rows());
        auto src = all();
        auto dst = p.all();
        for (size_t i = 0; i < src.size(); ++i) dst[i].mutable_value() = src[i].value();
        return p;
    }
};

// Per layer and head attention matrices captured during a forward pass.
template <typename S>
struct AttentionProbe {
    std::vector<Tensor<S>> weights;  // layer-major, then head
};

template <typename S>
struct EncoderOut {
    Var<S> nodes;  // n × d_model
    Var<S> z;      // 1 × d_model, the [CLS] readout
};

template <typename S>
EncoderOut<S> encoder_forward(const EncodedGraph& graph, const ModelParams<S>& params,
                              AttentionProbe<S>* probe = nullptr) {
    const ModelConfig& cfg = params.config;
    size_t n = graph.n();
    if (n == 0) throw ShapeError("encoder got an empty graph");
    if (n > cfg.max_nodes) {
        throw ShapeError("graph has " + std::to_string(n) + " nodes, exceeds max " +
                         std::to_string(cfg.max_nodes));
    }
    S inv_sqrt_dk = S(1) / static_cast<S>(std::sqrt(static_cast<double>(cfg.d_k)));
    Var<S> x = ad::embedding_rows(params.embedding, graph.token_ids);
    for (const auto& layer : params.layers) {
        std::vector<Var<S>> heads;
        heads.reserve(cfg.heads);
        for (const auto& h : layer.heads) {
            Var<S> q = ad::matmul(x, h.wq);
            Var<S> k = ad::matmul(x, h.wk);
            Var<S> v = ad::matmul(x, h.wv);
            Var<S> scores = ad::scale(ad::matmul(q, k, false, true), inv_sqrt_dk);
            Var<S> attn = ad::masked_softmax_rows(scores, graph.adj_self);
            if (probe) probe->weights.push_back(attn.value());
            heads.push_back(ad::matmul(attn, v));
        }
        Var<S> merged = ad::matmul(ad::concat_cols(heads), layer.wo);
        x = ad::layer_norm_rows(ad::add(x, merged), layer.ln1_gamma, layer.ln1_beta);
        Var<S> hidden = ad::relu(ad::add_row(ad::matmul(x, layer.ffn_w1, false, true), layer.ffn_b1));
        Var<S> ffn = ad::add_row(ad::matmul(hidden, layer.ffn_w2, false, true), layer.ffn_b2);
        x = ad::layer_norm_rows(ad::add(x, ffn), layer.ln2_gamma, layer.ln2_beta);
    }
    return {x, ad::row(x, 0)};
}

template <typename S>
Var<S> topic_head(const Var<S>& z, const ModelParams<S>& params) {
    return ad::softmax_rows(ad::add_row(ad::matmul(z, params.topic_w, false, true), params.topic_b));
}

template <typename S>
Var<S> stage_head(const Var<S>& p_topic, const ModelParams<S>& params) {
    return ad::softmax_rows(
        ad::add_row(ad::matmul(p_topic, params.stage_w, false, true), params.stage_b));
}

// Argmax restricted to the five real stages; UNLABELED is never predicted.
inline Stage pick_stage(const std::vector<double>& p_stage) {
    if (p_stage.size() < static_cast<size_t>(kNumRealStages)) {
        throw ShapeError("p_stage has " + std::to_string(p_stage.size()) + " entries, need " +
                         std::to_string(kNumStages));
    }
    int best = 0;
    for (int s = 1; s < kNumRealStages; ++s) {
        if (p_stage[s] > p_stage[best]) best = s;
    }
    return static_cast<Stage>(best);
}

struct StagePrediction {
    std::string cell_id;
    std::vector<double> z;
    std::vector<double> p_topic;
    std::vector<double> p_stage;
    Stage predicted = Stage::UNLABELED;
};

template <typename S>
std::vector<double> to_doubles(const Tensor<S>& t) {
    std::vector<double> out(t.numel());
    for (size_t i = 0; i < t.numel(); ++i) out[i] = static_cast<double>(t.data()[i]);
    return out;
}

// Full inference pipeline for one cell. Throws ParseError on unparseable
// source; batch callers skip and count those.
template <typename S>
StagePrediction predict_record(const CellRecord& rec, const Vocabulary& vocab,
                               const ModelParams<S>& params) {
    py::AstTree tree = py::parse_cell_ast(rec.source);
    std::string_view md =
        rec.markdown_context ? std::string_view(*rec.markdown_context) : std::string_view();
    CellGraph graph = build_cell_graph(tree, md, params.config.max_nodes, rec.cell_id());
    EncodedGraph encoded = encode_graph(graph, vocab);
    EncoderOut<S> out = encoder_forward(encoded, params);
    Var<S> p_topic = topic_head(out.z, params);
    Var<S> p_stage = stage_head(p_topic, params);
    StagePrediction pred;
    pred.cell_id = rec.cell_id();
    pred.z = to_doubles(out.z.value());
    pred.p_topic = to_doubles(p_topic.value());
    pred.p_stage = to_doubles(p_stage.value());
    pred.predicted = pick_stage(pred.p_stage);
    return pred;
}

template <typename S>
std::vector<StagePrediction> predict_records(const std::vector<CellRecord>& records,
                                             const Vocabulary& vocab,
                                             const ModelParams<S>& params,
                                             size_t* skipped = nullptr) {
    std::vector<StagePrediction> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        try {
            out.push_back(predict_record(rec, vocab, params));
        } catch (const ParseError&) {
            if (skipped) ++*skipped;
        }
    }
    return out;
}

}  // namespace coral
