#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "coral/tensor.hpp"

namespace coral {

// Reverse-mode autodiff over a dynamically built DAG. Each Var wraps a node
// holding the forward value; backward() walks the tape once, pushing
// cotangents from the root toward the leaves through per-node scratch
// buffers, then folds the result into the persistent .grad of every
// parameter leaf. Repeated backward() calls therefore accumulate.
template <typename S>
struct AdNode {
    Tensor<S> value;
    Tensor<S> grad;  // persistent accumulator, parameters only
    Tensor<S> cot;   // scratch for the backward pass in flight
    std::vector<std::shared_ptr<AdNode>> parents;
    std::function<void(AdNode&)> backprop;  // distributes this->cot to parents
    std::string name;
    bool requires_grad = false;
};

template <typename S>
class Var {
public:
    Var() = default;

    static Var constant(Tensor<S> t, std::string name = "") {
        auto n = std::make_shared<AdNode<S>>();
        n->value = std::move(t);
        n->name = std::move(name);
        return Var(std::move(n));
    }

    static Var param(Tensor<S> t, std::string name) {
        Var v = constant(std::move(t), std::move(name));
        v.n_->requires_grad = true;
        return v;
    }

    static Var op(Tensor<S> value, std::vector<std::shared_ptr<AdNode<S>>> parents,
                  std::function<void(AdNode<S>&)> backprop) {
        auto n = std::make_shared<AdNode<S>>();
        n->value = std::move(value);
        n->parents = std::move(parents);
        n->backprop = std::move(backprop);
        return Var(std::move(n));
    }

    bool defined() const { return n_ != nullptr; }
    const Tensor<S>& value() const { return n_->value; }
    Tensor<S>& mutable_value() { return n_->value; }

    Tensor<S>& grad() {
        if (n_->grad.numel() != n_->value.numel()) n_->grad.zero_like(n_->value);
        return n_->grad;
    }

    void zero_grad() { n_->grad.zero_like(n_->value); }

    const std::string& name() const { return n_->name; }
    const std::shared_ptr<AdNode<S>>& node() const { return n_; }

private:
    explicit Var(std::shared_ptr<AdNode<S>> n) : n_(std::move(n)) {}
    std::shared_ptr<AdNode<S>> n_;
};

// ---- backward ----

template <typename S>
void backward(const Var<S>& root) {
    if (root.value().numel() != 1) {
        throw ShapeError("backward root must be scalar, got " + shape_str(root.value()));
    }
    // Post-order DFS; the reverse is a topological order with every consumer
    // ahead of its inputs.
    std::vector<AdNode<S>*> order;
    std::unordered_set<AdNode<S>*> seen;
    std::vector<std::pair<AdNode<S>*, size_t>> stack;
    stack.emplace_back(root.node().get(), 0);
    seen.insert(root.node().get());
    while (!stack.empty()) {
        auto& [node, next] = stack.back();
        if (next < node->parents.size()) {
            AdNode<S>* p = node->parents[next++].get();
            if (seen.insert(p).second) stack.emplace_back(p, 0);
        } else {
            order.push_back(node);
            stack.pop_back();
        }
    }
    for (AdNode<S>* n : order) n->cot.zero_like(n->value);
    root.node()->cot.data()[0] = S(1);
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backprop) (*it)->backprop(**it);
    }
    for (AdNode<S>* n : order) {
        if (!n->requires_grad) continue;
        if (n->grad.numel() != n->value.numel()) n->grad.zero_like(n->value);
        n->grad.add_scaled(n->cot, S(1));
    }
}

// ---- kernels ----

namespace ad {

template <typename S>
void check_same_shape(const Tensor<S>& a, const Tensor<S>& b, const char* what) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + " shape mismatch: " + shape_str(a) + " vs " +
                         shape_str(b));
    }
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b, bool ta = false, bool tb = false) {
    Tensor<S> c = matmul_raw(a.value(), b.value(), ta, tb);
    auto an = a.node().get();
    auto bn = b.node().get();
    return Var<S>::op(std::move(c), {a.node(), b.node()}, [an, bn, ta, tb](AdNode<S>& self) {
        const Tensor<S>& g = self.cot;
        Tensor<S> da = ta ? matmul_raw(bn->value, g, tb, true) : matmul_raw(g, bn->value, false, !tb);
        Tensor<S> db = tb ? matmul_raw(g, an->value, true, ta) : matmul_raw(an->value, g, !ta, false);
        an->cot.add_scaled(da, S(1));
        bn->cot.add_scaled(db, S(1));
    });
}

template <typename S>
Var<S> add(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a.value(), b.value(), "add");
    Tensor<S> c = a.value();
    c.add_scaled(b.value(), S(1));
    auto an = a.node().get();
    auto bn = b.node().get();
    return Var<S>::op(std::move(c), {a.node(), b.node()}, [an, bn](AdNode<S>& self) {
        an->cot.add_scaled(self.cot, S(1));
        bn->cot.add_scaled(self.cot, S(1));
    });
}

template <typename S>
Var<S> sub(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a.value(), b.value(), "sub");
    Tensor<S> c = a.value();
    c.add_scaled(b.value(), S(-1));
    auto an = a.node().get();
    auto bn = b.node().get();
    return Var<S>::op(std::move(c), {a.node(), b.node()}, [an, bn](AdNode<S>& self) {
        an->cot.add_scaled(self.cot, S(1));
        bn->cot.add_scaled(self.cot, S(-1));
    });
}

// a: n×d, row: 1×d, added to every row of a.
template <typename S>
Var<S> add_row(const Var<S>& a, const Var<S>& row) {
    if (row.value().rows() != 1 || row.value().cols() != a.value().cols()) {
        throw ShapeError("add_row shape mismatch: " + shape_str(a.value()) + " vs " +
                         shape_str(row.value()));
    }
    Tensor<S> c = a.value();
    for (size_t i = 0; i < c.rows(); ++i) {
        S* crow = c.row_ptr(i);
        const S* r = row.value().row_ptr(0);
        for (size_t j = 0; j < c.cols(); ++j) crow[j] += r[j];
    }
    auto an = a.node().get();
    auto rn = row.node().get();
    return Var<S>::op(std::move(c), {a.node(), row.node()}, [an, rn](AdNode<S>& self) {
        an->cot.add_scaled(self.cot, S(1));
        S* rcot = rn->cot.row_ptr(0);
        for (size_t i = 0; i < self.cot.rows(); ++i) {
            const S* g = self.cot.row_ptr(i);
            for (size_t j = 0; j < self.cot.cols(); ++j) rcot[j] += g[j];
        }
    });
}

template <typename S>
Var<S> mul(const Var<S>& a, const Var<S>& b) {
    check_same_shape(a.value(), b.value(), "mul");
    Tensor<S> c = a.value();
    for (size_t i = 0; i < c.numel(); ++i) c.data()[i] *= b.value().data()[i];
    auto an = a.node().get();
    auto bn = b.node().get();
    return Var<S>::op(std::move(c), {a.node(), b.node()}, [an, bn](AdNode<S>& self) {
        for (size_t i = 0; i < self.cot.numel(); ++i) {
            an->cot.data()[i] += self.cot.data()[i] * bn->value.data()[i];
            bn->cot.data()[i] += self.cot.data()[i] * an->value.data()[i];
        }
    });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
    Tensor<S> c = a.value();
    for (S& v : c.data()) v = v > S(0) ? v : S(0);
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()}, [an](AdNode<S>& self) {
        for (size_t i = 0; i < self.cot.numel(); ++i) {
            if (an->value.data()[i] > S(0)) an->cot.data()[i] += self.cot.data()[i];
        }
    });
}

template <typename S>
Var<S> scale(const Var<S>& a, S k) {
    Tensor<S> c = a.value();
    for (S& v : c.data()) v *= k;
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()},
                      [an, k](AdNode<S>& self) { an->cot.add_scaled(self.cot, k); });
}

template <typename S>
Var<S> add_const(const Var<S>& a, S k) {
    Tensor<S> c = a.value();
    for (S& v : c.data()) v += k;
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()},
                      [an](AdNode<S>& self) { an->cot.add_scaled(self.cot, S(1)); });
}

// Row softmax with a boolean mask; masked entries are exactly 0.0 in the
// output (the logit is treated as −∞, never materialized). mask is row-major
// with the same extent as the logits.
template <typename S>
Var<S> masked_softmax_rows(const Var<S>& logits, std::vector<uint8_t> mask) {
    const Tensor<S>& x = logits.value();
    if (mask.size() != x.numel()) {
        throw ShapeError("mask size " + std::to_string(mask.size()) + " does not cover logits " +
                         shape_str(x));
    }
    Tensor<S> y(x.rows(), x.cols());
    for (size_t i = 0; i < x.rows(); ++i) {
        const S* xr = x.row_ptr(i);
        const uint8_t* mr = mask.data() + i * x.cols();
        S mx = S(0);
        bool any = false;
        for (size_t j = 0; j < x.cols(); ++j) {
            if (!mr[j]) continue;
            if (!any || xr[j] > mx) mx = xr[j];
            any = true;
        }
        if (!any) {
            throw NumericError("softmax row " + std::to_string(i) + " is fully masked");
        }
        S* yr = y.row_ptr(i);
        S sum = S(0);
        for (size_t j = 0; j < x.cols(); ++j) {
            if (!mr[j]) continue;
            yr[j] = std::exp(xr[j] - mx);
            sum += yr[j];
        }
        for (size_t j = 0; j < x.cols(); ++j) {
            if (mr[j]) yr[j] /= sum;
        }
    }
    auto xn = logits.node().get();
    return Var<S>::op(std::move(y), {logits.node()},
                      [xn, mask = std::move(mask)](AdNode<S>& self) {
                          size_t cols = self.value.cols();
                          for (size_t i = 0; i < self.value.rows(); ++i) {
                              const S* yr = self.value.row_ptr(i);
                              const S* gr = self.cot.row_ptr(i);
                              const uint8_t* mr = mask.data() + i * cols;
                              S dot = S(0);
                              for (size_t j = 0; j < cols; ++j) {
                                  if (mr[j]) dot += gr[j] * yr[j];
                              }
                              S* xg = xn->cot.row_ptr(i);
                              for (size_t j = 0; j < cols; ++j) {
                                  if (mr[j]) xg[j] += yr[j] * (gr[j] - dot);
                              }
                          }
                      });
}

template <typename S>
Var<S> softmax_rows(const Var<S>& logits) {
    return masked_softmax_rows(logits, std::vector<uint8_t>(logits.value().numel(), 1));
}

// Per-row layer norm with learned scale/shift (1×d each). Population
// variance; eps inside the square root, so constant rows normalize to zero.
template <typename S>
Var<S> layer_norm_rows(const Var<S>& x, const Var<S>& gamma, const Var<S>& beta,
                       S eps = S(1e-5)) {
    const Tensor<S>& v = x.value();
    size_t d = v.cols();
    if (gamma.value().rows() != 1 || gamma.value().cols() != d || beta.value().rows() != 1 ||
        beta.value().cols() != d) {
        throw ShapeError("layer_norm scale/shift must be 1x" + std::to_string(d) + ", got " +
                         shape_str(gamma.value()) + " and " + shape_str(beta.value()));
    }
    Tensor<S> xhat(v.rows(), d);
    std::vector<S> inv(v.rows());
    Tensor<S> y(v.rows(), d);
    for (size_t i = 0; i < v.rows(); ++i) {
        const S* xr = v.row_ptr(i);
        S mean = S(0);
        for (size_t j = 0; j < d; ++j) mean += xr[j];
        mean /= static_cast<S>(d);
        S var = S(0);
        for (size_t j = 0; j < d; ++j) var += (xr[j] - mean) * (xr[j] - mean);
        var /= static_cast<S>(d);
        inv[i] = S(1) / std::sqrt(var + eps);
        S* hr = xhat.row_ptr(i);
        S* yr = y.row_ptr(i);
        const S* g = gamma.value().row_ptr(0);
        const S* b = beta.value().row_ptr(0);
        for (size_t j = 0; j < d; ++j) {
            hr[j] = (xr[j] - mean) * inv[i];
            yr[j] = g[j] * hr[j] + b[j];
        }
    }
    auto xn = x.node().get();
    auto gn = gamma.node().get();
    auto bn = beta.node().get();
    return Var<S>::op(
        std::move(y), {x.node(), gamma.node(), beta.node()},
        [xn, gn, bn, xhat = std::move(xhat), inv = std::move(inv)](AdNode<S>& self) {
            size_t d = self.value.cols();
            const S* g = gn->value.row_ptr(0);
            for (size_t i = 0; i < self.value.rows(); ++i) {
                const S* gr = self.cot.row_ptr(i);
                const S* hr = xhat.row_ptr(i);
                S* gcot = gn->cot.row_ptr(0);
                S* bcot = bn->cot.row_ptr(0);
                S m1 = S(0), m2 = S(0);
                for (size_t j = 0; j < d; ++j) {
                    gcot[j] += gr[j] * hr[j];
                    bcot[j] += gr[j];
                    S dh = gr[j] * g[j];
                    m1 += dh;
                    m2 += dh * hr[j];
                }
                m1 /= static_cast<S>(d);
                m2 /= static_cast<S>(d);
                S* xg = xn->cot.row_ptr(i);
                for (size_t j = 0; j < d; ++j) {
                    S dh = gr[j] * g[j];
                    xg[j] += inv[i] * (dh - m1 - hr[j] * m2);
                }
            }
        });
}

template <typename S>
Var<S> l2_normalize_rows(const Var<S>& x) {
    const Tensor<S>& v = x.value();
    Tensor<S> y(v.rows(), v.cols());
    std::vector<S> norms(v.rows());
    for (size_t i = 0; i < v.rows(); ++i) {
        const S* xr = v.row_ptr(i);
        S s = S(0);
        for (size_t j = 0; j < v.cols(); ++j) s += xr[j] * xr[j];
        S n = std::sqrt(s);
        if (n == S(0)) {
            throw NumericError("cannot L2-normalize zero row " + std::to_string(i));
        }
        norms[i] = n;
        S* yr = y.row_ptr(i);
        for (size_t j = 0; j < v.cols(); ++j) yr[j] = xr[j] / n;
    }
    auto xn = x.node().get();
    return Var<S>::op(std::move(y), {x.node()}, [xn, norms = std::move(norms)](AdNode<S>& self) {
        size_t d = self.value.cols();
        for (size_t i = 0; i < self.value.rows(); ++i) {
            const S* yr = self.value.row_ptr(i);
            const S* gr = self.cot.row_ptr(i);
            S dot = S(0);
            for (size_t j = 0; j < d; ++j) dot += gr[j] * yr[j];
            S* xg = xn->cot.row_ptr(i);
            for (size_t j = 0; j < d; ++j) xg[j] += (gr[j] - yr[j] * dot) / norms[i];
        }
    });
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
    if (parts.empty()) throw ShapeError("concat_cols of zero tensors");
    size_t rows = parts[0].value().rows();
    size_t cols = 0;
    for (const auto& p : parts) {
        if (p.value().rows() != rows) {
            throw ShapeError("concat_cols row mismatch: " + shape_str(parts[0].value()) + " vs " +
                             shape_str(p.value()));
        }
        cols += p.value().cols();
    }
    Tensor<S> c(rows, cols);
    std::vector<std::shared_ptr<AdNode<S>>> parents;
    std::vector<size_t> offsets;
    size_t off = 0;
    for (const auto& p : parts) {
        const Tensor<S>& v = p.value();
        for (size_t i = 0; i < rows; ++i) {
            const S* src = v.row_ptr(i);
            S* dst = c.row_ptr(i) + off;
            for (size_t j = 0; j < v.cols(); ++j) dst[j] = src[j];
        }
        parents.push_back(p.node());
        offsets.push_back(off);
        off += v.cols();
    }
    return Var<S>::op(std::move(c), std::move(parents),
                      [offsets = std::move(offsets)](AdNode<S>& self) {
                          for (size_t pi = 0; pi < self.parents.size(); ++pi) {
                              AdNode<S>* p = self.parents[pi].get();
                              size_t w = p->value.cols();
                              for (size_t i = 0; i < self.value.rows(); ++i) {
                                  const S* g = self.cot.row_ptr(i) + offsets[pi];
                                  S* pg = p->cot.row_ptr(i);
                                  for (size_t j = 0; j < w; ++j) pg[j] += g[j];
                              }
                          }
                      });
}

template <typename S>
Var<S> embedding_rows(const Var<S>& table, std::vector<int> ids) {
    const Tensor<S>& t = table.value();
    Tensor<S> c(ids.size(), t.cols());
    for (size_t i = 0; i < ids.size(); ++i) {
        int id = ids[i];
        if (id < 0 || static_cast<size_t>(id) >= t.rows()) {
            throw ShapeError("token id " + std::to_string(id) + " out of embedding range [0," +
                             std::to_string(t.rows()) + ")");
        }
        const S* src = t.row_ptr(static_cast<size_t>(id));
        S* dst = c.row_ptr(i);
        for (size_t j = 0; j < t.cols(); ++j) dst[j] = src[j];
    }
    auto tn = table.node().get();
    return Var<S>::op(std::move(c), {table.node()}, [tn, ids = std::move(ids)](AdNode<S>& self) {
        for (size_t i = 0; i < ids.size(); ++i) {
            const S* g = self.cot.row_ptr(i);
            S* tg = tn->cot.row_ptr(static_cast<size_t>(ids[i]));
            for (size_t j = 0; j < self.value.cols(); ++j) tg[j] += g[j];
        }
    });
}

template <typename S>
Var<S> sum_all(const Var<S>& a) {
    S s = S(0);
    for (S v : a.value().data()) s += v;
    auto an = a.node().get();
    return Var<S>::op(Tensor<S>::scalar(s), {a.node()}, [an](AdNode<S>& self) {
        S g = self.cot.data()[0];
        for (S& v : an->cot.data()) v += g;
    });
}

template <typename S>
Var<S> mean_all(const Var<S>& a) {
    size_t n = a.value().numel();
    if (n == 0) throw ShapeError("mean of empty tensor");
    S s = S(0);
    for (S v : a.value().data()) s += v;
    s /= static_cast<S>(n);
    auto an = a.node().get();
    return Var<S>::op(Tensor<S>::scalar(s), {a.node()}, [an, n](AdNode<S>& self) {
        S g = self.cot.data()[0] / static_cast<S>(n);
        for (S& v : an->cot.data()) v += g;
    });
}

template <typename S>
Var<S> row(const Var<S>& a, size_t i) {
    const Tensor<S>& v = a.value();
    if (i >= v.rows()) {
        throw ShapeError("row " + std::to_string(i) + " out of range for " + shape_str(v));
    }
    Tensor<S> c(1, v.cols());
    for (size_t j = 0; j < v.cols(); ++j) c.at(0, j) = v.at(i, j);
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()}, [an, i](AdNode<S>& self) {
        S* dst = an->cot.row_ptr(i);
        const S* g = self.cot.row_ptr(0);
        for (size_t j = 0; j < self.value.cols(); ++j) dst[j] += g[j];
    });
}

template <typename S>
Var<S> element(const Var<S>& a, size_t i, size_t j) {
    const Tensor<S>& v = a.value();
    if (i >= v.rows() || j >= v.cols()) {
        throw ShapeError("element (" + std::to_string(i) + "," + std::to_string(j) +
                         ") out of range for " + shape_str(v));
    }
    auto an = a.node().get();
    return Var<S>::op(Tensor<S>::scalar(v.at(i, j)), {a.node()}, [an, i, j](AdNode<S>& self) {
        an->cot.at(i, j) += self.cot.data()[0];
    });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
    const Tensor<S>& v = a.value();
    Tensor<S> c(v.cols(), v.rows());
    for (size_t i = 0; i < v.rows(); ++i)
        for (size_t j = 0; j < v.cols(); ++j) c.at(j, i) = v.at(i, j);
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()}, [an](AdNode<S>& self) {
        for (size_t i = 0; i < self.value.rows(); ++i)
            for (size_t j = 0; j < self.value.cols(); ++j) an->cot.at(j, i) += self.cot.at(i, j);
    });
}

// ln(max(x, floor)). Clamped coordinates report into *clamp_count (when
// given) and get zero gradient.
template <typename S>
Var<S> log_clamped(const Var<S>& a, S floor, size_t* clamp_count = nullptr) {
    Tensor<S> c = a.value();
    for (S& v : c.data()) {
        if (v < floor) {
            if (clamp_count) ++*clamp_count;
            v = floor;
        }
        v = std::log(v);
    }
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()}, [an, floor](AdNode<S>& self) {
        for (size_t i = 0; i < self.cot.numel(); ++i) {
            S x = an->value.data()[i];
            if (x >= floor) an->cot.data()[i] += self.cot.data()[i] / x;
        }
    });
}

// x·ln(x) with the 0·log 0 := 0 convention.
template <typename S>
Var<S> xlogx(const Var<S>& a) {
    Tensor<S> c = a.value();
    for (S& v : c.data()) v = v > S(0) ? v * std::log(v) : S(0);
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()}, [an](AdNode<S>& self) {
        for (size_t i = 0; i < self.cot.numel(); ++i) {
            S x = an->value.data()[i];
            if (x > S(0)) an->cot.data()[i] += self.cot.data()[i] * (std::log(x) + S(1));
        }
    });
}

template <typename S>
Var<S> sqrt_elem(const Var<S>& a) {
    Tensor<S> c = a.value();
    for (S& v : c.data()) v = std::sqrt(v);
    auto an = a.node().get();
    return Var<S>::op(std::move(c), {a.node()}, [an](AdNode<S>& self) {
        for (size_t i = 0; i < self.cot.numel(); ++i) {
            S y = self.value.data()[i];
            an->cot.data()[i] += self.cot.data()[i] * S(0.5) / std::max(y, S(1e-12));
        }
    });
}

// Σ aᵢbᵢ over matching shapes, as a scalar.
template <typename S>
Var<S> dot(const Var<S>& a, const Var<S>& b) {
    return sum_all(mul(a, b));
}

}  // namespace ad

}  // namespace coral
