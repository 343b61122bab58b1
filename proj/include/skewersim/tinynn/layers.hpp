#pragma once

#include <string>
#include <vector>

#include "skewersim/tinynn/tensor.hpp"

namespace skewersim::nn {

/// y = W x + b, W is (out, in).
template <typename T>
class Dense {
public:
    Dense() = default;
    Dense(int in, int out) : in_(in), out_(out), W_("W", {out, in}), b_("b", {out}) {}

    static constexpr const char* kind() { return "Dense"; }
    int in_features() const { return in_; }
    int out_features() const { return out_; }

    void init(Rng& rng) {
        init_uniform(W_.value, rng, std::sqrt(6.0 / (in_ + out_)));
        b_.value.zero();
    }

    Tensor<T> forward(const Tensor<T>& x) {
        require_size(x, static_cast<std::size_t>(in_), "Dense input");
        x_ = x;
        cached_ = true;
        Tensor<T> y({out_});
        for (int o = 0; o < out_; ++o) {
            T acc = b_.value[static_cast<std::size_t>(o)];
            const T* w = &W_.value.data[static_cast<std::size_t>(o * in_)];
            for (int i = 0; i < in_; ++i) acc += w[i] * x.data[static_cast<std::size_t>(i)];
            y[static_cast<std::size_t>(o)] = acc;
        }
        return y;
    }

    /// Accumulates parameter gradients and returns dL/dx.
    Tensor<T> backward(const Tensor<T>& gy) {
        if (!cached_) throw StateError("Dense backward before forward");
        require_size(gy, static_cast<std::size_t>(out_), "Dense upstream");
        Tensor<T> gx({in_});
        for (int o = 0; o < out_; ++o) {
            const T g = gy[static_cast<std::size_t>(o)];
            b_.grad[static_cast<std::size_t>(o)] += g;
            if (g == T(0)) continue;
            T* dw = &W_.grad.data[static_cast<std::size_t>(o * in_)];
            const T* w = &W_.value.data[static_cast<std::size_t>(o * in_)];
            for (int i = 0; i < in_; ++i) {
                dw[i] += g * x_.data[static_cast<std::size_t>(i)];
                gx.data[static_cast<std::size_t>(i)] += g * w[i];
            }
        }
        return gx;
    }

    std::vector<Param<T>*> params() { return {&W_, &b_}; }
    Param<T>& weight() { return W_; }
    Param<T>& bias() { return b_; }

private:
    int in_ = 0, out_ = 0;
    Param<T> W_, b_;
    Tensor<T> x_;
    bool cached_ = false;
};

/// 3x3 convolution over (C, H, W) with zero "same" padding, configurable
/// stride and dilation. Output is (O, ceil(H/stride), ceil(W/stride)); output
/// pixel (i, j) is centred on input pixel (i*stride, j*stride).
template <typename T>
class Conv3x3 {
public:
    Conv3x3() = default;
    Conv3x3(int in_ch, int out_ch, int stride = 2, int dilation = 1)
        : in_(in_ch), out_(out_ch), stride_(stride), dil_(dilation), W_("W", {out_ch, in_ch, 3, 3}), b_("b", {out_ch}) {
        if (stride < 1 || dilation < 1) throw DimensionError("stride and dilation must be positive");
    }

    static constexpr const char* kind() { return "Conv3x3"; }
    int stride() const { return stride_; }
    int dilation() const { return dil_; }
    int in_channels() const { return in_; }
    int out_channels() const { return out_; }

    void init(Rng& rng) {
        init_uniform(W_.value, rng, std::sqrt(6.0 / (9.0 * (in_ + out_))));
        b_.value.zero();
    }

    Tensor<T> forward(const Tensor<T>& x) {
        if (x.shape.size() != 3 || x.shape[0] != in_) throw DimensionError("Conv3x3 expects (C,H,W) with C = in_channels");
        x_ = x;
        cached_ = true;
        const int H = x.shape[1], Wd = x.shape[2];
        const int Ho = (H - 1) / stride_ + 1, Wo = (Wd - 1) / stride_ + 1;
        Tensor<T> y({out_, Ho, Wo});
        for (int o = 0; o < out_; ++o) {
            T* yo = &y.data[static_cast<std::size_t>(o * Ho * Wo)];
            std::fill(yo, yo + Ho * Wo, b_.value[static_cast<std::size_t>(o)]);
            for (int c = 0; c < in_; ++c) {
                const T* xc = &x.data[static_cast<std::size_t>(c * H * Wd)];
                const T* w = &W_.value.data[static_cast<std::size_t>((o * in_ + c) * 9)];
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const T wk = w[ky * 3 + kx];
                        const Span s = span(ky, kx, H, Wd, Ho, Wo);
                        for (int i = s.i0; i <= s.i1; ++i) {
                            T* yr = yo + i * Wo;
                            const T* xr = xc + (i * stride_ + s.dy) * Wd + s.dx;
                            if (stride_ == 1)
                                for (int j = s.j0; j <= s.j1; ++j) yr[j] += wk * xr[j];
                            else
                                for (int j = s.j0; j <= s.j1; ++j) yr[j] += wk * xr[j * stride_];
                        }
                    }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& gy) {
        if (!cached_) throw StateError("Conv3x3 backward before forward");
        const int H = x_.shape[1], Wd = x_.shape[2];
        const int Ho = (H - 1) / stride_ + 1, Wo = (Wd - 1) / stride_ + 1;
        if (gy.shape != std::vector<int>{out_, Ho, Wo}) throw DimensionError("Conv3x3 upstream shape");
        Tensor<T> gx(x_.shape);
        for (int o = 0; o < out_; ++o) {
            const T* go = &gy.data[static_cast<std::size_t>(o * Ho * Wo)];
            T gb = 0;
            for (int k = 0; k < Ho * Wo; ++k) gb += go[k];
            b_.grad[static_cast<std::size_t>(o)] += gb;
            for (int c = 0; c < in_; ++c) {
                const T* xc = &x_.data[static_cast<std::size_t>(c * H * Wd)];
                T* gxc = &gx.data[static_cast<std::size_t>(c * H * Wd)];
                const std::size_t widx = static_cast<std::size_t>((o * in_ + c) * 9);
                for (int ky = 0; ky < 3; ++ky)
                    for (int kx = 0; kx < 3; ++kx) {
                        const T wk = W_.value.data[widx + static_cast<std::size_t>(ky * 3 + kx)];
                        const Span s = span(ky, kx, H, Wd, Ho, Wo);
                        T gw = 0;
                        for (int i = s.i0; i <= s.i1; ++i) {
                            const T* gr = go + i * Wo;
                            const int off = (i * stride_ + s.dy) * Wd + s.dx;
                            const T* xr = xc + off;
                            T* gxr = gxc + off;
                            if (stride_ == 1) {
                                for (int j = s.j0; j <= s.j1; ++j) {
                                    gw += gr[j] * xr[j];
                                    gxr[j] += gr[j] * wk;
                                }
                            } else {
                                for (int j = s.j0; j <= s.j1; ++j) {
                                    gw += gr[j] * xr[j * stride_];
                                    gxr[j * stride_] += gr[j] * wk;
                                }
                            }
                        }
                        W_.grad.data[widx + static_cast<std::size_t>(ky * 3 + kx)] += gw;
                    }
            }
        }
        return gx;
    }

    std::vector<Param<T>*> params() { return {&W_, &b_}; }
    Param<T>& weight() { return W_; }
    Param<T>& bias() { return b_; }

private:
    /// Output index ranges whose tap (ky, kx) lands inside the input.
    struct Span {
        int dy, dx, i0, i1, j0, j1;
    };
    Span span(int ky, int kx, int H, int Wd, int Ho, int Wo) const {
        const int dy = (ky - 1) * dil_, dx = (kx - 1) * dil_;
        auto lo = [&](int d) { return d >= 0 ? 0 : (-d + stride_ - 1) / stride_; };
        auto hi = [&](int d, int n, int no) { return n - 1 - d < 0 ? -1 : std::min(no - 1, (n - 1 - d) / stride_); };
        return {dy, dx, lo(dy), hi(dy, H, Ho), lo(dx), hi(dx, Wd, Wo)};
    }

    int in_ = 0, out_ = 0, stride_ = 2, dil_ = 1;
    Param<T> W_, b_;
    Tensor<T> x_;
    bool cached_ = false;
};

/// Two-gate recurrent cell run over a (L, I) sequence from h0 = 0:
///   z = s(Wz x + Uz h + bz), r = s(Wr x + Ur h + br)
///   n = tanh(Wn x + Un (r*h) + bn), h' = (1-z) n + z h
/// forward returns the final hidden state.
template <typename T>
class GRUCell {
public:
    GRUCell() = default;
    GRUCell(int input, int hidden) : in_(input), hid_(hidden) {
        for (const char* g : {"z", "r", "n"}) {
            W_.emplace_back(std::string("W") + g, std::vector<int>{hidden, input});
            U_.emplace_back(std::string("U") + g, std::vector<int>{hidden, hidden});
            b_.emplace_back(std::string("b") + g, std::vector<int>{hidden});
        }
    }

    static constexpr const char* kind() { return "GatedRecurrentCell"; }
    int input_size() const { return in_; }
    int hidden_size() const { return hid_; }

    void init(Rng& rng) {
        const double s = 1.0 / std::sqrt(static_cast<double>(hid_));
        for (int g = 0; g < 3; ++g) {
            init_uniform(W_[g].value, rng, s);
            init_uniform(U_[g].value, rng, s);
            b_[g].value.zero();
        }
    }

    Tensor<T> forward(const Tensor<T>& seq) {
        if (seq.shape.size() != 2 || seq.shape[1] != in_) throw DimensionError("GRU expects (L, input_size)");
        const int L = seq.shape[0];
        seq_ = seq;
        steps_.assign(static_cast<std::size_t>(L), {});
        std::vector<T> h(static_cast<std::size_t>(hid_), T(0));
        for (int t = 0; t < L; ++t) {
            const T* x = &seq.data[static_cast<std::size_t>(t * in_)];
            Step& s = steps_[static_cast<std::size_t>(t)];
            s.h_prev = h;
            s.z = affine(0, x, h.data());
            s.r = affine(1, x, h.data());
            for (auto& v : s.z) v = sigmoid_t(v);
            for (auto& v : s.r) v = sigmoid_t(v);
            s.rh.resize(h.size());
            for (std::size_t k = 0; k < h.size(); ++k) s.rh[k] = s.r[k] * h[k];
            s.n = affine(2, x, s.rh.data());
            for (auto& v : s.n) v = std::tanh(v);
            for (std::size_t k = 0; k < h.size(); ++k) h[k] = (T(1) - s.z[k]) * s.n[k] + s.z[k] * h[k];
        }
        cached_ = true;
        return Tensor<T>({hid_}, h);
    }

    /// Back-propagation through time from dL/dh_L. Returns dL/dseq.
    Tensor<T> backward(const Tensor<T>& gh_final) {
        if (!cached_) throw StateError("GRU backward before forward");
        require_size(gh_final, static_cast<std::size_t>(hid_), "GRU upstream");
        const int L = static_cast<int>(steps_.size());
        Tensor<T> gseq(seq_.shape);
        std::vector<T> gh = gh_final.data;
        const std::size_t H = static_cast<std::size_t>(hid_);
        std::vector<T> da_z(H), da_r(H), da_n(H), dh_prev(H), d_rh(H);
        for (int t = L - 1; t >= 0; --t) {
            const Step& s = steps_[static_cast<std::size_t>(t)];
            const T* x = &seq_.data[static_cast<std::size_t>(t * in_)];
            for (std::size_t k = 0; k < H; ++k) {
                const T dn = gh[k] * (T(1) - s.z[k]);
                const T dz = gh[k] * (s.h_prev[k] - s.n[k]);
                dh_prev[k] = gh[k] * s.z[k];
                da_n[k] = dn * (T(1) - s.n[k] * s.n[k]);
                da_z[k] = dz * s.z[k] * (T(1) - s.z[k]);
            }
            // candidate path through r*h
            accumulate(2, da_n, x, s.rh);
            std::fill(d_rh.begin(), d_rh.end(), T(0));
            for (std::size_t k = 0; k < H; ++k)
                for (std::size_t j = 0; j < H; ++j) d_rh[j] += U_[2].value.data[k * H + j] * da_n[k];
            for (std::size_t j = 0; j < H; ++j) {
                dh_prev[j] += d_rh[j] * s.r[j];
                const T dr = d_rh[j] * s.h_prev[j];
                da_r[j] = dr * s.r[j] * (T(1) - s.r[j]);
            }
            accumulate(0, da_z, x, s.h_prev);
            accumulate(1, da_r, x, s.h_prev);
            for (std::size_t k = 0; k < H; ++k)
                for (std::size_t j = 0; j < H; ++j)
                    dh_prev[j] += U_[0].value.data[k * H + j] * da_z[k] + U_[1].value.data[k * H + j] * da_r[k];
            T* gx = &gseq.data[static_cast<std::size_t>(t * in_)];
            for (std::size_t k = 0; k < H; ++k)
                for (int i = 0; i < in_; ++i) {
                    const std::size_t w = k * static_cast<std::size_t>(in_) + static_cast<std::size_t>(i);
                    gx[i] += W_[0].value.data[w] * da_z[k] + W_[1].value.data[w] * da_r[k] + W_[2].value.data[w] * da_n[k];
                }
            gh = dh_prev;
        }
        return gseq;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> p;
        for (int g = 0; g < 3; ++g) {
            p.push_back(&W_[g]);
            p.push_back(&U_[g]);
            p.push_back(&b_[g]);
        }
        return p;
    }

private:
    struct Step {
        std::vector<T> h_prev, z, r, rh, n;
    };

    std::vector<T> affine(int g, const T* x, const T* h) const {
        const std::size_t H = static_cast<std::size_t>(hid_), I = static_cast<std::size_t>(in_);
        std::vector<T> a(b_[g].value.data);
        for (std::size_t k = 0; k < H; ++k) {
            T acc = 0;
            for (std::size_t i = 0; i < I; ++i) acc += W_[g].value.data[k * I + i] * x[i];
            for (std::size_t j = 0; j < H; ++j) acc += U_[g].value.data[k * H + j] * h[j];
            a[k] += acc;
        }
        return a;
    }

    void accumulate(int g, const std::vector<T>& da, const T* x, const std::vector<T>& hin) {
        const std::size_t H = static_cast<std::size_t>(hid_), I = static_cast<std::size_t>(in_);
        for (std::size_t k = 0; k < H; ++k) {
            b_[g].grad.data[k] += da[k];
            for (std::size_t i = 0; i < I; ++i) W_[g].grad.data[k * I + i] += da[k] * x[i];
            for (std::size_t j = 0; j < H; ++j) U_[g].grad.data[k * H + j] += da[k] * hin[j];
        }
    }

    int in_ = 0, hid_ = 0;
    std::vector<Param<T>> W_, U_, b_;
    Tensor<T> seq_;
    std::vector<Step> steps_;
    bool cached_ = false;
};

/// Element-wise tanh, caches its output.
template <typename T>
class Tanh {
public:
    Tensor<T> forward(const Tensor<T>& x) {
        y_ = x;
        for (auto& v : y_.data) v = std::tanh(v);
        cached_ = true;
        return y_;
    }
    Tensor<T> backward(const Tensor<T>& gy) {
        if (!cached_) throw StateError("Tanh backward before forward");
        require_size(gy, y_.size(), "Tanh upstream");
        Tensor<T> gx = gy;
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] *= T(1) - y_[i] * y_[i];
        return gx;
    }

private:
    Tensor<T> y_;
    bool cached_ = false;
};

}  // namespace skewersim::nn
