#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include "cfr/tensor.hpp"

namespace cfr {

// Central-difference check of a scalar-valued tensor function. Returns the
// max over elements of |analytic - numeric| / max(1, |analytic|). The
// function is re-invoked with x perturbed in place, so it must read x's
// current values on every call.
inline double grad_check(const std::function<Tensor(const Tensor&)>& f, Tensor& x, double h = 1e-5) {
    if (!x.requires_grad()) throw contract_error("grad_check: x must require grad");
    Tensor y = f(x);
    if (y.size() != 1) throw contract_error("grad_check: f must be scalar-valued");
    backward(y, {x});
    std::vector<double> analytic = x.grad();

    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double saved = x[i];
        x[i] = saved + h;
        const double fp = f(x).value();
        x[i] = saved - h;
        const double fm = f(x).value();
        x[i] = saved;
        const double numeric = (fp - fm) / (2.0 * h);
        const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
        worst = std::max(worst, err);
    }
    return worst;
}

}  // namespace cfr
