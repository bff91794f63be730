#pragma once

#include <optional>
#include <vector>

#include "coral/autodiff.hpp"
#include "coral/model.hpp"
#include "coral/stage.hpp"
#include "coral/weak_label.hpp"

namespace coral {

struct LossWeights {
    double weak = 0.1;
    double unique_stage = 0.3;
    double reconstruction = 1.0;
    double unique_topic = 1.0;

    void validate() const {
        if (weak < 0 || unique_stage < 0 || reconstruction < 0 || unique_topic < 0) {
            throw ConfigError("loss weights must be nonnegative");
        }
    }
};

struct LossReport {
    double total = 0;
    double weak = 0;
    double unique_stage = 0;
    double reconstruction = 0;
    double unique_topic = 0;
    size_t batch_size = 0;
    size_t supervised = 0;
};

// Counters for numeric edge cases worth surfacing but not fatal.
struct LossWarnings {
    size_t log_clamps = 0;
    size_t degenerate_rec_batches = 0;
};

// Cross entropy against weak labels, averaged over the covered cells of the
// batch; uncovered cells contribute nothing. Returns nothing when no cell is
// covered.
template <typename S>
std::optional<Var<S>> loss_weak(const std::vector<Var<S>>& p_stage,
                                const std::vector<Stage>& labels, LossWarnings* warnings,
                                size_t* supervised = nullptr) {
    std::vector<Var<S>> terms;
    for (size_t c = 0; c < p_stage.size(); ++c) {
        if (labels[c] == Stage::UNLABELED) continue;
        Var<S> p = ad::element(p_stage[c], 0, static_cast<size_t>(labels[c]));
        terms.push_back(ad::scale(
            ad::log_clamped(p, S(1e-12), warnings ? &warnings->log_clamps : nullptr), S(-1)));
    }
    if (supervised) *supervised = terms.size();
    if (terms.empty()) return std::nullopt;
    return ad::mean_all(ad::concat_cols(terms));
}

// Entropy of p_stage, averaged over every cell of the batch (covered or
// not), driving the stage distribution toward a single peak.
template <typename S>
Var<S> loss_unique_stage(const std::vector<Var<S>>& p_stage) {
    std::vector<Var<S>> terms;
    terms.reserve(p_stage.size());
    for (const auto& p : p_stage) terms.push_back(ad::scale(ad::sum_all(ad::xlogx(p)), S(-1)));
    return ad::mean_all(ad::concat_cols(terms));
}

// Negative-sample indices for one anchor: uniform over the rest of the
// batch, without replacement while the batch allows it.
inline std::vector<size_t> sample_negatives(size_t batch, size_t anchor, size_t m, Rng& rng) {
    std::vector<size_t> others;
    others.reserve(batch - 1);
    for (size_t i = 0; i < batch; ++i) {
        if (i != anchor) others.push_back(i);
    }
    if (others.empty()) return {};
    std::vector<size_t> picks;
    picks.reserve(m);
    if (others.size() >= m) {
        rng.shuffle(others);
        picks.assign(others.begin(), others.begin() + static_cast<long>(m));
    } else {
        for (size_t i = 0; i < m; ++i) picks.push_back(others[rng.next_index(others.size())]);
    }
    return picks;
}

// Contrastive max-margin reconstruction. Each cell's topic distribution is
// decoded back through R; the margin separates its own embedding from m
// in-batch negatives. Dot products use L2-normalized vectors unless
// `normalized` is cleared.
template <typename S>
Var<S> loss_reconstruction(const std::vector<Var<S>>& z, const std::vector<Var<S>>& p_topic,
                           const Var<S>& recon_r, size_t m, Rng& rng, bool normalized,
                           LossWarnings* warnings) {
    size_t batch = z.size();
    if (batch == 0) throw ShapeError("reconstruction loss over an empty batch");
    if (batch == 1) {
        if (warnings) ++warnings->degenerate_rec_batches;
        return Var<S>::constant(Tensor<S>::scalar(S(0)), "rec_degenerate");
    }
    std::vector<Var<S>> r_hat(batch), z_hat(batch);
    for (size_t c = 0; c < batch; ++c) {
        Var<S> r = ad::matmul(p_topic[c], recon_r, false, true);  // 1 × d_model
        r_hat[c] = normalized ? ad::l2_normalize_rows(r) : r;
        z_hat[c] = normalized ? ad::l2_normalize_rows(z[c]) : z[c];
    }
    std::vector<Var<S>> cell_losses;
    cell_losses.reserve(batch);
    for (size_t c = 0; c < batch; ++c) {
        Var<S> pos = ad::dot(r_hat[c], z_hat[c]);
        std::vector<Var<S>> hinges;
        for (size_t neg : sample_negatives(batch, c, m, rng)) {
            Var<S> margin =
                ad::add_const(ad::sub(ad::dot(r_hat[c], r_hat[neg]), pos), S(1));
            hinges.push_back(ad::relu(margin));
        }
        cell_losses.push_back(ad::sum_all(ad::concat_cols(hinges)));
    }
    return ad::mean_all(ad::concat_cols(cell_losses));
}

// ‖R_norm·R_normᵀ − I‖_F over the K topic embeddings (columns of R, each
// L2-normalized); zero exactly at pairwise-orthogonal topics.
template <typename S>
Var<S> loss_unique_topic(const Var<S>& recon_r) {
    size_t k = recon_r.value().cols();
    Var<S> topics = ad::l2_normalize_rows(ad::transpose(recon_r));  // K × d_model
    Var<S> gram = ad::matmul(topics, topics, false, true);          // K × K
    Var<S> dev = ad::sub(gram, Var<S>::constant(Tensor<S>::identity(k)));
    return ad::sqrt_elem(ad::sum_all(ad::mul(dev, dev)));
}

template <typename S>
struct CombinedLoss {
    Var<S> total;
    LossReport report;
};

// λ-weighted combination over one batch of per-cell head outputs.
template <typename S>
CombinedLoss<S> total_loss(const std::vector<Var<S>>& z, const std::vector<Var<S>>& p_stage,
                           const std::vector<Var<S>>& p_topic, const std::vector<Stage>& labels,
                           const Var<S>& recon_r, const LossWeights& weights, size_t m, Rng& rng,
                           bool normalized_rec, LossWarnings* warnings) {
    CombinedLoss<S> out;
    out.report.batch_size = z.size();
    std::optional<Var<S>> ws = loss_weak(p_stage, labels, warnings, &out.report.supervised);
    Var<S> us = loss_unique_stage(p_stage);
    Var<S> rec = loss_reconstruction(z, p_topic, recon_r, m, rng, normalized_rec, warnings);
    Var<S> ut = loss_unique_topic(recon_r);

    Var<S> weighted_ws =
        ws ? ad::scale(*ws, static_cast<S>(weights.weak))
           : Var<S>::constant(Tensor<S>::scalar(S(0)), "ws_uncovered");
    Var<S> left = ad::add(weighted_ws, ad::scale(us, static_cast<S>(weights.unique_stage)));
    Var<S> right = ad::add(ad::scale(rec, static_cast<S>(weights.reconstruction)),
                           ad::scale(ut, static_cast<S>(weights.unique_topic)));
    out.total = ad::add(left, right);

    out.report.weak = ws ? static_cast<double>(ws->value().data()[0]) : 0.0;
    out.report.unique_stage = static_cast<double>(us.value().data()[0]);
    out.report.reconstruction = static_cast<double>(rec.value().data()[0]);
    out.report.unique_topic = static_cast<double>(ut.value().data()[0]);
    out.report.total = static_cast<double>(out.total.value().data()[0]);
    return out;
}

}  // namespace coral
