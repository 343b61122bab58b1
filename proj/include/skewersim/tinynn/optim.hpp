#pragma once

#include <vector>

#include "skewersim/tinynn/tensor.hpp"

namespace skewersim::nn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

/// Bias-corrected Adam over a fixed list of parameters.
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(std::vector<Param<T>*> params, AdamConfig cfg = {}) : params_(std::move(params)), cfg_(cfg) {
        for (auto* p : params_) {
            m_.emplace_back(p->value.shape);
            v_.emplace_back(p->value.shape);
        }
    }

    void step() {
        ++t_;
        const double c1 = 1.0 - std::pow(cfg_.beta1, t_);
        const double c2 = 1.0 - std::pow(cfg_.beta2, t_);
        for (std::size_t k = 0; k < params_.size(); ++k) {
            auto& p = *params_[k];
            if (p.grad.shape != p.value.shape) throw DimensionError("gradient shape mismatch for " + p.name);
            for (std::size_t i = 0; i < p.value.size(); ++i) {
                const double g = p.grad[i];
                const double m = cfg_.beta1 * m_[k][i] + (1 - cfg_.beta1) * g;
                const double v = cfg_.beta2 * v_[k][i] + (1 - cfg_.beta2) * g * g;
                m_[k][i] = static_cast<T>(m);
                v_[k][i] = static_cast<T>(v);
                p.value[i] -= static_cast<T>(cfg_.lr * (m / c1) / (std::sqrt(v / c2) + cfg_.eps));
            }
        }
    }

    void zero_grad() {
        for (auto* p : params_) p->grad.zero();
    }

    long step_count() const { return t_; }
    double learning_rate() const { return cfg_.lr; }

private:
    std::vector<Param<T>*> params_;
    AdamConfig cfg_;
    std::vector<Tensor<T>> m_, v_;
    long t_ = 0;
};

}  // namespace skewersim::nn
