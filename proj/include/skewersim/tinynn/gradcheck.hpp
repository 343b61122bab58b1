#pragma once

#include <functional>
#include <vector>

#include "skewersim/tinynn/tensor.hpp"

namespace skewersim::nn {

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::string worst_param;
    long checked = 0;
};

/// Relative error with a small floor so that two near-zero gradients agree.
inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

/// Compares analytic gradients against central differences for every
/// parameter. `loss` runs a forward pass and returns the scalar loss;
/// `backprop` zeroes gradients and fills them for the same sample.
inline GradCheckResult gradient_check(const std::vector<Param<double>*>& params, const std::function<double()>& loss,
                                      const std::function<void()>& backprop, double h = 1e-5) {
    GradCheckResult res;
    backprop();
    for (auto* p : params) {
        for (std::size_t i = 0; i < p->value.size(); ++i) {
            const double orig = p->value[i];
            p->value[i] = orig + h;
            const double lp = loss();
            p->value[i] = orig - h;
            const double lm = loss();
            p->value[i] = orig;
            const double numeric = (lp - lm) / (2 * h);
            const double err = relative_error(p->grad[i], numeric);
            ++res.checked;
            if (err > res.max_rel_error) {
                res.max_rel_error = err;
                res.worst_param = p->name + "[" + std::to_string(i) + "]";
            }
        }
    }
    return res;
}

}  // namespace skewersim::nn
