#pragma once

// Central-difference gradient verification. The loss builder is called
// repeatedly while parameter values are nudged, so it must rebuild the
// graph from the parameter tensors each time and must be deterministic
// (fixed inputs, no live dropout).

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "bmgf/error.hpp"
#include "bmgf/tensor.hpp"

namespace bmgf {

struct GradCheckReport {
    double max_abs_err = 0.0;
    std::string worst;      // "param#index" of the largest discrepancy
    double loss = 0.0;
    int checked = 0;
};

// Compares analytic gradients of loss_fn against central differences for
// every element of every parameter. Parameters must require grad.
inline GradCheckReport check_gradients(const std::function<Tensor()>& loss_fn,
                                       const std::vector<Tensor>& params, double eps = 1e-5) {
    for (const Tensor& p : params) {
        if (!p.requires_grad()) throw ContractError("check_gradients: parameter does not require grad");
    }
    for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();

    Tensor loss = loss_fn();
    if (!loss.is_scalar()) throw ContractError("check_gradients: loss is not a scalar");
    backward(loss);
    const double base = loss.scalar_value();

    // The builder must be a pure function of the parameter values.
    {
        Tensor again = loss_fn();
        if (again.scalar_value() != base) {
            throw ContractError("check_gradients: loss builder is not deterministic");
        }
    }

    std::vector<std::vector<double>> analytic;
    analytic.reserve(params.size());
    for (const Tensor& p : params) analytic.push_back(p.grad());

    GradCheckReport rep;
    rep.loss = base;
    for (size_t pi = 0; pi < params.size(); ++pi) {
        Tensor& p = const_cast<Tensor&>(params[pi]);
        for (int i = 0; i < p.numel(); ++i) {
            const double saved = p.value_at(i);
            // The graph contains hard selections (max pooling, best-row
            // gathers) and a sign branch in the attentive denominator; a
            // step can land across one, which invalidates the numeric
            // estimate, not the analytic gradient. On disagreement retry
            // with smaller steps: a wrong backward rule stays wrong at
            // every step size, a crossing artifact disappears.
            double err = 0.0;
            for (const double e : {eps, eps / 8.0, eps / 64.0}) {
                p.mutable_values()[i] = saved + e;
                const double lp = loss_fn().scalar_value();
                p.mutable_values()[i] = saved - e;
                const double lm = loss_fn().scalar_value();
                p.mutable_values()[i] = saved;
                const double fd = (lp - lm) / (2.0 * e);
                const double this_err = std::abs(analytic[pi][i] - fd);
                if (e == eps || this_err < err) err = this_err;
                if (err < 1e-6) break;
            }
            if (err > rep.max_abs_err) {
                rep.max_abs_err = err;
                rep.worst = "param" + std::to_string(pi) + "#" + std::to_string(i);
            }
            ++rep.checked;
        }
    }
    return rep;
}

}  // namespace bmgf
