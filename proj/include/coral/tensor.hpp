#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "coral/common.hpp"

namespace coral {

// Dense row-major matrix. Everything the encoder needs is rank ≤ 2, so
// vectors are 1×d rows and scalars are 1×1.
template <typename S>
class Tensor {
public:
    Tensor() = default;
    Tensor(size_t rows, size_t cols, S fill = S(0))
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    static Tensor scalar(S v) {
        Tensor t(1, 1);
        t.data_[0] = v;
        return t;
    }

    static Tensor row_vector(std::vector<S> v) {
        Tensor t;
        t.rows_ = 1;
        t.cols_ = v.size();
        t.data_ = std::move(v);
        return t;
    }

    static Tensor identity(size_t n) {
        Tensor t(n, n);
        for (size_t i = 0; i < n; ++i) t.at(i, i) = S(1);
        return t;
    }

    size_t rows() const { return rows_; }
    size_t cols() const { return cols_; }
    size_t numel() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    S& at(size_t i, size_t j) { return data_[i * cols_ + j]; }
    S at(size_t i, size_t j) const { return data_[i * cols_ + j]; }
    S* row_ptr(size_t i) { return data_.data() + i * cols_; }
    const S* row_ptr(size_t i) const { return data_.data() + i * cols_; }

    std::vector<S>& data() { return data_; }
    const std::vector<S>& data() const { return data_; }

    bool same_shape(const Tensor& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

    void zero() { std::fill(data_.begin(), data_.end(), S(0)); }

    // Reshape-to-zero without losing capacity; used for gradient scratch.
    void zero_like(const Tensor& o) {
        rows_ = o.rows_;
        cols_ = o.cols_;
        data_.assign(o.numel(), S(0));
    }

    void add_scaled(const Tensor& o, S k) {
        for (size_t i = 0; i < data_.size(); ++i) data_[i] += k * o.data_[i];
    }

    bool all_finite() const {
        for (S v : data_) {
            if (!std::isfinite(static_cast<double>(v))) return false;
        }
        return true;
    }

private:
    size_t rows_ = 0;
    size_t cols_ = 0;
    std::vector<S> data_;
};

template <typename S>
std::string shape_str(const Tensor<S>& t) {
    return "(" + std::to_string(t.rows()) + "x" + std::to_string(t.cols()) + ")";
}

// C = op(A)·op(B) with optional transposes. Transposed A is materialized so
// both inner loops stay row-contiguous.
template <typename S>
Tensor<S> matmul_raw(const Tensor<S>& a, const Tensor<S>& b, bool ta, bool tb) {
    size_t m = ta ? a.cols() : a.rows();
    size_t k = ta ? a.rows() : a.cols();
    size_t kb = tb ? b.cols() : b.rows();
    size_t n = tb ? b.rows() : b.cols();
    if (k != kb) {
        throw ShapeError("matmul mismatch: " + shape_str(a) + (ta ? "^T" : "") + " x " +
                         shape_str(b) + (tb ? "^T" : ""));
    }
    Tensor<S> at;
    const Tensor<S>* lhs = &a;
    if (ta) {
        at = Tensor<S>(m, k);
        for (size_t i = 0; i < a.rows(); ++i)
            for (size_t j = 0; j < a.cols(); ++j) at.at(j, i) = a.at(i, j);
        lhs = &at;
    }
    Tensor<S> c(m, n);
    if (!tb) {
        for (size_t i = 0; i < m; ++i) {
            const S* arow = lhs->row_ptr(i);
            S* crow = c.row_ptr(i);
            for (size_t t = 0; t < k; ++t) {
                S av = arow[t];
                const S* brow = b.row_ptr(t);
                for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
            }
        }
    } else {
        for (size_t i = 0; i < m; ++i) {
            const S* arow = lhs->row_ptr(i);
            S* crow = c.row_ptr(i);
            for (size_t j = 0; j < n; ++j) {
                const S* brow = b.row_ptr(j);
                S acc = S(0);
                for (size_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
                crow[j] = acc;
            }
        }
    }
    return c;
}

template <typename S>
void fill_uniform(Tensor<S>& t, Rng& rng, double lo, double hi) {
    for (S& v : t.data()) v = static_cast<S>(rng.uniform(lo, hi));
}

}  // namespace coral
