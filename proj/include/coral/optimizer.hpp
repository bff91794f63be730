#pragma once

#include <string>
#include <unordered_map>
#include <vector>

#include "coral/autodiff.hpp"

namespace coral {

// Classical momentum: v ← β·v + g; θ ← θ − α·v. Velocities are keyed by
// parameter name and start at zero.
template <typename S>
class SgdMomentum {
public:
    SgdMomentum(double lr, double beta) : lr_(lr), beta_(beta) {
        if (lr <= 0) throw ConfigError("learning rate must be positive");
        if (beta < 0 || beta >= 1) throw ConfigError("momentum must lie in [0,1)");
    }

    void step(std::vector<Var<S>>& params) {
        for (auto& p : params) {
            const Tensor<S>& g = p.grad();
            if (!g.all_finite()) {
                throw NumericError("non-finite gradient in parameter '" + p.name() + "'");
            }
            Tensor<S>& v = velocity_[p.name()];
            if (v.numel() != g.numel()) v.zero_like(g);
            Tensor<S>& theta = p.mutable_value();
            for (size_t i = 0; i < g.numel(); ++i) {
                v.data()[i] = static_cast<S>(beta_) * v.data()[i] + g.data()[i];
                theta.data()[i] -= static_cast<S>(lr_) * v.data()[i];
            }
        }
    }

    double lr() const { return lr_; }
    double beta() const { return beta_; }

private:
    double lr_;
    double beta_;
    std::unordered_map<std::string, Tensor<S>> velocity_;
};

template <typename S>
void zero_grads(std::vector<Var<S>>& params) {
    for (auto& p : params) p.zero_grad();
}

}  // namespace coral
