#pragma once

#include "skewersim/tinynn/tensor.hpp"

namespace skewersim::nn {

inline constexpr double kLogEps = 1e-12;

template <typename T>
struct LossGrad {
    T loss = 0;
    Tensor<T> grad;
    Tensor<T> probs;  // softmax output or sigmoid map, whichever applies
};

template <typename T>
inline Tensor<T> softmax(const Tensor<T>& logits) {
    Tensor<T> p = logits;
    const T m = *std::max_element(p.data.begin(), p.data.end());
    T sum = 0;
    for (auto& v : p.data) sum += (v = std::exp(v - m));
    for (auto& v : p.data) v /= sum;
    return p;
}

/// Softmax cross-entropy against a class index; grad is dL/dlogits.
template <typename T>
inline LossGrad<T> cross_entropy(const Tensor<T>& logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size()) throw DimensionError("label out of range");
    LossGrad<T> out;
    out.probs = softmax(logits);
    const T m = *std::max_element(logits.data.begin(), logits.data.end());
    T lse = 0;
    for (T v : logits.data) lse += std::exp(v - m);
    out.loss = std::log(lse) + m - logits[static_cast<std::size_t>(label)];
    out.grad = out.probs;
    out.grad[static_cast<std::size_t>(label)] -= T(1);
    return out;
}

/// Mean per-pixel binary cross-entropy of probabilities, logs clamped at eps.
template <typename T>
inline T bce(const Tensor<T>& pred, const Tensor<T>& target) {
    require_size(target, pred.size(), "bce target");
    double acc = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double p = pred[i], t = target[i];
        acc -= t * std::log(std::max(p, kLogEps)) + (1 - t) * std::log(std::max(1 - p, kLogEps));
    }
    return static_cast<T>(acc / static_cast<double>(pred.size()));
}

/// Sigmoid followed by mean BCE, differentiated with respect to the logits.
template <typename T>
inline LossGrad<T> sigmoid_bce(const Tensor<T>& logits, const Tensor<T>& target) {
    require_size(target, logits.size(), "bce target");
    LossGrad<T> out;
    out.probs = logits;
    for (auto& v : out.probs.data) v = sigmoid_t(v);
    out.loss = bce(out.probs, target);
    out.grad = out.probs;
    const T n = static_cast<T>(logits.size());
    for (std::size_t i = 0; i < out.grad.size(); ++i) out.grad[i] = (out.grad[i] - target[i]) / n;
    return out;
}

}  // namespace skewersim::nn
