#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "skewersim/common.hpp"

namespace skewersim::nn {

template <typename T>
struct Tensor {
    std::vector<int> shape;
    std::vector<T> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel(shape)), fill);
    }
    Tensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
        if (static_cast<long>(data.size()) != numel(shape)) throw DimensionError("data does not match shape");
    }

    static long numel(const std::vector<int>& s) {
        return std::accumulate(s.begin(), s.end(), 1L, std::multiplies<long>());
    }

    std::size_t size() const { return data.size(); }
    T& operator[](std::size_t i) { return data[i]; }
    const T& operator[](std::size_t i) const { return data[i]; }
    int dim(std::size_t i) const { return shape.at(i); }

    void zero() { std::fill(data.begin(), data.end(), T(0)); }

    bool all_finite() const {
        return std::all_of(data.begin(), data.end(), [](T v) { return std::isfinite(v); });
    }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out;
        out.shape = shape;
        out.data.assign(data.begin(), data.end());
        return out;
    }

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

/// A trainable array with its accumulated gradient.
template <typename T>
struct Param {
    std::string name;
    Tensor<T> value;
    Tensor<T> grad;

    Param() = default;
    Param(std::string n, std::vector<int> shape) : name(std::move(n)), value(shape), grad(shape) {}
};

template <typename T>
inline void require_size(const Tensor<T>& x, std::size_t n, const char* what) {
    if (x.size() != n)
        throw DimensionError(std::string(what) + ": expected " + std::to_string(n) + " values, got " +
                             std::to_string(x.size()));
}

template <typename T>
inline void init_uniform(Tensor<T>& t, Rng& rng, double s) {
    std::uniform_real_distribution<double> d(-s, s);
    for (auto& v : t.data) v = static_cast<T>(d(rng));
}

template <typename T>
inline T sigmoid_t(T x) {
    return x >= 0 ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace skewersim::nn
