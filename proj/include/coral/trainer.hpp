#pragma once

#include <limits>
#include <optional>
#include <ostream>
#include <unordered_map>
#include <vector>

#include "coral/objectives.hpp"
#include "coral/optimizer.hpp"

namespace coral {

struct TrainerConfig {
    size_t batch_size = 16;
    size_t max_epochs = 8;
    size_t patience = 3;
    double lr = 1e-5;
    double momentum = 0.9;
    size_t negatives = 5;
    uint64_t seed = 0;
    bool disable_early_stop = false;
    bool normalized_reconstruction = true;

    void validate() const {
        if (batch_size == 0 || max_epochs == 0 || negatives == 0) {
            throw ConfigError("batch size, epochs, and negatives must be positive");
        }
        if (lr <= 0) throw ConfigError("learning rate must be positive");
        if (momentum < 0 || momentum >= 1) throw ConfigError("momentum must lie in [0,1)");
        if (!disable_early_stop && (patience == 0 || patience > max_epochs)) {
            throw ConfigError("patience must lie in [1, max_epochs]");
        }
    }
};

// Strict-improvement early stopping on validation loss.
class EarlyStopper {
public:
    EarlyStopper(size_t patience, bool disabled) : patience_(patience), disabled_(disabled) {}

    // Returns true when this epoch's value is a new best.
    bool observe(double val) {
        if (val < best_) {
            best_ = val;
            streak_ = 0;
            return true;
        }
        ++streak_;
        return false;
    }

    bool should_stop() const { return !disabled_ && streak_ >= patience_; }
    double best() const { return best_; }

private:
    size_t patience_;
    bool disabled_;
    double best_ = std::numeric_limits<double>::infinity();
    size_t streak_ = 0;
};

template <typename S>
struct EncodedCell {
    EncodedGraph graph;
    Stage label = Stage::UNLABELED;
};

// Parse, graph, and encode cells once up front; unparseable sources are
// skipped and counted.
template <typename S>
std::vector<EncodedCell<S>> encode_cells(const std::vector<CellRecord>& records,
                                         const std::vector<WeakLabel>& labels,
                                         const Vocabulary& vocab, const ModelConfig& cfg,
                                         size_t* skipped) {
    std::unordered_map<std::string, Stage> by_id;
    for (const auto& l : labels) by_id[l.cell_id] = l.stage;
    std::vector<EncodedCell<S>> out;
    out.reserve(records.size());
    for (const auto& rec : records) {
        py::AstTree tree;
        try {
            tree = py::parse_cell_ast(rec.source);
        } catch (const ParseError&) {
            if (skipped) ++*skipped;
            continue;
        }
        std::string_view md =
            rec.markdown_context ? std::string_view(*rec.markdown_context) : std::string_view();
        EncodedCell<S> cell;
        cell.graph = encode_graph(build_cell_graph(tree, md, cfg.max_nodes, rec.cell_id()), vocab);
        auto it = by_id.find(rec.cell_id());
        if (it != by_id.end()) cell.label = it->second;
        out.push_back(std::move(cell));
    }
    return out;
}

template <typename S>
struct TrainOutcome {
    ModelParams<S> best_params;
    size_t best_epoch = 0;  // 1-based
    double best_val_loss = std::numeric_limits<double>::infinity();
    std::vector<double> val_losses;  // one per completed epoch
    uint64_t steps = 0;
    LossWarnings warnings;
    size_t skipped_train = 0;
    size_t skipped_val = 0;
};

namespace detail {

// Forward one batch through the encoder and heads; shared by the optimizer
// path and validation.
template <typename S>
CombinedLoss<S> batch_forward(const std::vector<EncodedCell<S>>& cells,
                              const std::vector<size_t>& batch, const ModelParams<S>& params,
                              const LossWeights& weights, size_t negatives, Rng& neg_rng,
                              bool normalized_rec, LossWarnings* warnings) {
    std::vector<Var<S>> z, p_topic, p_stage;
    std::vector<Stage> labels;
    z.reserve(batch.size());
    for (size_t idx : batch) {
        EncoderOut<S> out = encoder_forward(cells[idx].graph, params);
        Var<S> pt = topic_head(out.z, params);
        Var<S> ps = stage_head(pt, params);
        z.push_back(out.z);
        p_topic.push_back(pt);
        p_stage.push_back(ps);
        labels.push_back(cells[idx].label);
    }
    return total_loss(z, p_stage, p_topic, labels, params.recon_r, weights, negatives, neg_rng,
                      normalized_rec, warnings);
}

template <typename S>
double validation_loss(const std::vector<EncodedCell<S>>& cells, const ModelParams<S>& params,
                       const LossWeights& weights, const TrainerConfig& tcfg,
                       LossWarnings* warnings) {
    // Fixed batch order and a fresh fixed-seed negative stream keep this
    // comparable across epochs.
    Rng neg_rng(seed_stream(tcfg.seed, "val-negatives"));
    double weighted = 0;
    size_t total = 0;
    for (size_t start = 0; start < cells.size(); start += tcfg.batch_size) {
        std::vector<size_t> batch;
        for (size_t i = start; i < std::min(cells.size(), start + tcfg.batch_size); ++i) {
            batch.push_back(i);
        }
        CombinedLoss<S> loss =
            batch_forward(cells, batch, params, weights, tcfg.negatives, neg_rng,
                          tcfg.normalized_reconstruction, warnings);
        weighted += loss.report.total * static_cast<double>(batch.size());
        total += batch.size();
    }
    return total ? weighted / static_cast<double>(total) : 0.0;
}

}  // namespace detail

// Mini-batch training with per-epoch seeded shuffles, early stopping on
// validation loss, and best-epoch checkpointing. Supervision arrives
// exclusively as WeakLabel values; gold annotations have no path in.
template <typename S>
TrainOutcome<S> train(const std::vector<CellRecord>& train_records,
                      const std::vector<WeakLabel>& train_labels,
                      const std::vector<CellRecord>& val_records,
                      const std::vector<WeakLabel>& val_labels, const Vocabulary& vocab,
                      const ModelConfig& mcfg, const TrainerConfig& tcfg,
                      const LossWeights& weights, std::ostream* log = nullptr) {
    mcfg.validate();
    tcfg.validate();
    weights.validate();

    TrainOutcome<S> outcome;
    std::vector<EncodedCell<S>> train_cells =
        encode_cells<S>(train_records, train_labels, vocab, mcfg, &outcome.skipped_train);
    std::vector<EncodedCell<S>> val_cells =
        encode_cells<S>(val_records, val_labels, vocab, mcfg, &outcome.skipped_val);
    if (train_cells.empty()) throw ConfigError("empty training set");

    ModelParams<S> params = ModelParams<S>::init(mcfg, vocab.size(), tcfg.seed);
    std::vector<Var<S>> leaves = params.all();
    SgdMomentum<S> opt(tcfg.lr, tcfg.momentum);
    EarlyStopper stopper(tcfg.patience, tcfg.disable_early_stop);

    outcome.best_params = params.clone();
    std::vector<size_t> order(train_cells.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (size_t epoch = 1; epoch <= tcfg.max_epochs; ++epoch) {
        Rng shuffle_rng(seed_stream(tcfg.seed, "epoch-shuffle-" + std::to_string(epoch)));
        shuffle_rng.shuffle(order);
        Rng neg_rng(seed_stream(tcfg.seed, "negatives-epoch-" + std::to_string(epoch)));

        for (size_t start = 0; start < order.size(); start += tcfg.batch_size) {
            std::vector<size_t> batch(
                order.begin() + static_cast<long>(start),
                order.begin() + static_cast<long>(std::min(order.size(), start + tcfg.batch_size)));
            CombinedLoss<S> loss =
                detail::batch_forward(train_cells, batch, params, weights, tcfg.negatives,
                                      neg_rng, tcfg.normalized_reconstruction, &outcome.warnings);
            if (!std::isfinite(loss.report.total)) {
                throw NumericError("non-finite training loss at step " +
                                   std::to_string(outcome.steps));
            }
            zero_grads(leaves);
            backward(loss.total);
            opt.step(leaves);
            ++outcome.steps;
            if (log) {
                nlohmann::json j;
                j["step"] = outcome.steps;
                j["L"] = loss.report.total;
                j["L_ws"] = loss.report.weak;
                j["L_us"] = loss.report.unique_stage;
                j["L_rec"] = loss.report.reconstruction;
                j["L_ut"] = loss.report.unique_topic;
                *log << j.dump() << "\n";
            }
        }

        double val = val_cells.empty()
                         ? detail::validation_loss(train_cells, params, weights, tcfg, nullptr)
                         : detail::validation_loss(val_cells, params, weights, tcfg, nullptr);
        outcome.val_losses.push_back(val);
        if (stopper.observe(val)) {
            outcome.best_params = params.clone();
            outcome.best_epoch = epoch;
            outcome.best_val_loss = val;
        }
        if (stopper.should_stop()) break;
    }
    return outcome;
}

}  // namespace coral
