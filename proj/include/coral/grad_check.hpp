#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "coral/autodiff.hpp"

namespace coral {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::string worst_param;
    size_t worst_coord = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

// Central finite differences against reverse-mode gradients. f rebuilds the
// forward graph from the given parameter leaves on every call and must be
// deterministic.
template <typename S, typename F>
GradCheckReport grad_check(F&& f, std::vector<Var<S>> params, double eps) {
    if (eps <= 0) throw ConfigError("grad_check eps must be positive");
    for (auto& p : params) p.zero_grad();
    backward(f());
    std::vector<Tensor<S>> analytic;
    analytic.reserve(params.size());
    for (auto& p : params) analytic.push_back(p.grad());

    GradCheckReport rep;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        auto& data = params[pi].mutable_value().data();
        for (size_t c = 0; c < data.size(); ++c) {
            S orig = data[c];
            data[c] = orig + static_cast<S>(eps);
            double plus = static_cast<double>(f().value().data()[0]);
            data[c] = orig - static_cast<S>(eps);
            double minus = static_cast<double>(f().value().data()[0]);
            data[c] = orig;
            double numeric = (plus - minus) / (2.0 * eps);
            double a = static_cast<double>(analytic[pi].data()[c]);
            double rel = std::fabs(a - numeric) / std::max(1e-8, std::fabs(a) + std::fabs(numeric));
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.worst_param = params[pi].name();
                rep.worst_coord = c;
                rep.worst_analytic = a;
                rep.worst_numeric = numeric;
            }
        }
    }
    return rep;
}

}  // namespace coral
