#pragma once

#include <optional>

#include "skewersim/policy/example.hpp"
#include "skewersim/tinynn.hpp"

namespace skewersim::policy {

using namespace skewersim::nn;

enum class PolicyMode { Multimodal, VisionOnly, HapticOnly, OpenLoop };

inline std::string_view to_string(PolicyMode m) {
    switch (m) {
        case PolicyMode::Multimodal: return "Multimodal";
        case PolicyMode::VisionOnly: return "VisionOnly";
        case PolicyMode::HapticOnly: return "HapticOnly";
        case PolicyMode::OpenLoop: return "OpenLoop";
    }
    return "?";
}

inline PolicyMode policy_mode_from_string(const std::string& s) {
    for (auto m : {PolicyMode::Multimodal, PolicyMode::VisionOnly, PolicyMode::HapticOnly, PolicyMode::OpenLoop})
        if (to_string(m) == s) return m;
    throw ModeError("unknown policy mode " + s);
}

inline bool uses_image(PolicyMode m) { return m != PolicyMode::HapticOnly; }
inline bool uses_trace(PolicyMode m) { return m == PolicyMode::Multimodal || m == PolicyMode::HapticOnly; }

inline constexpr int kVisualDim = 32;
inline constexpr int kHapticDim = 16;
inline constexpr int kEmbedDim = kVisualDim + kHapticDim;
inline constexpr double kTraceScale = 0.5;  // N, brings probe forces to O(1)

/// Two-branch classifier: strided conv encoder for a 32x32 view, recurrent
/// encoder for the force trace, linear head over the concatenated embedding.
/// Single-modality modes zero the other branch at the embedding.
template <typename T>
class PolicyNet {
public:
    explicit PolicyNet(PolicyMode mode = PolicyMode::Multimodal)
        : mode_(mode), conv1_(3, 8, 2), conv2_(8, 8, 2), vis_fc_(8 * 8 * 8, kVisualDim), gru_(1, kHapticDim), head_(kEmbedDim, 2) {}

    PolicyMode mode() const { return mode_; }
    void set_mode(PolicyMode m) { mode_ = m; }

    void init(Rng& rng) {
        conv1_.init(rng);
        conv2_.init(rng);
        vis_fc_.init(rng);
        gru_.init(rng);
        head_.init(rng);
    }

    static Tensor<T> image_tensor(const Image& img) {
        if (img.width != kCropSide || img.height != kCropSide) throw DimensionError("policy image must be 32x32");
        const std::size_t n = static_cast<std::size_t>(kCropSide * kCropSide);
        Tensor<T> x({3, kCropSide, kCropSide});
        for (int r = 0; r < kCropSide; ++r)
            for (int c = 0; c < kCropSide; ++c)
                for (int ch = 0; ch < 3; ++ch)
                    x[static_cast<std::size_t>(ch) * n + static_cast<std::size_t>(r * kCropSide + c)] = static_cast<T>(img.at(r, c, ch) - 0.5f);
        return x;
    }

    static Tensor<T> trace_tensor(const std::vector<double>& trace) {
        if (trace.size() != static_cast<std::size_t>(sim::kTraceLength)) throw DimensionError("trace must have 26 samples");
        Tensor<T> x({sim::kTraceLength, 1});
        for (std::size_t i = 0; i < trace.size(); ++i) x[i] = static_cast<T>(trace[i] / kTraceScale);
        return x;
    }

    /// The view this mode classifies: post-contact image, or the overhead crop for OpenLoop.
    const Image* view_of(const Example& e) const { return mode_ == PolicyMode::OpenLoop ? &e.overhead_crop : &e.image; }

    /// 48-d fused embedding; branches unused by the mode are exactly zero.
    Tensor<T> embed(const Image* img, const std::vector<double>* trace) {
        Tensor<T> z({kEmbedDim});
        has_vis_ = uses_image(mode_);
        has_hap_ = uses_trace(mode_);
        if (has_vis_) {
            if (!img) throw InputError(std::string(to_string(mode_)) + " needs an image");
            auto h = act1_.forward(conv1_.forward(image_tensor(*img)));
            h = act2_.forward(conv2_.forward(h));
            h.shape = {8 * 8 * 8};
            const auto v = act3_.forward(vis_fc_.forward(h));
            std::copy(v.data.begin(), v.data.end(), z.data.begin());
        }
        if (has_hap_) {
            if (!trace) throw InputError(std::string(to_string(mode_)) + " needs a haptic trace");
            const auto h = gru_.forward(trace_tensor(*trace));
            std::copy(h.data.begin(), h.data.end(), z.data.begin() + kVisualDim);
        }
        return z;
    }

    Tensor<T> embed(const Example& e) { return embed(view_of(e), &e.trace); }

    /// Logits over {VerticalSkewer, AngledSkewer}.
    Tensor<T> forward(const Image* img, const std::vector<double>* trace) { return head_.forward(embed(img, trace)); }
    Tensor<T> forward(const Example& e) { return forward(view_of(e), &e.trace); }

    void backward(const Tensor<T>& g_logits) {
        const auto gz = head_.backward(g_logits);
        if (has_vis_) {
            Tensor<T> gv({kVisualDim}, std::vector<T>(gz.data.begin(), gz.data.begin() + kVisualDim));
            auto g = vis_fc_.backward(act3_.backward(gv));
            g.shape = {8, 8, 8};
            conv1_.backward(act1_.backward(conv2_.backward(act2_.backward(g))));
        }
        if (has_hap_) {
            Tensor<T> gh({kHapticDim}, std::vector<T>(gz.data.begin() + kVisualDim, gz.data.end()));
            gru_.backward(gh);
        }
    }

    /// Parameters reachable from the loss in this mode.
    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> p;
        auto add = [&](const std::vector<Param<T>*>& v) { p.insert(p.end(), v.begin(), v.end()); };
        if (uses_image(mode_)) {
            add(conv1_.params());
            add(conv2_.params());
            add(vis_fc_.params());
        }
        if (uses_trace(mode_)) add(gru_.params());
        add(head_.params());
        return p;
    }

    nlohmann::json to_json() {
        return {{"model", "PolicyNet"},
                {"mode", std::string(to_string(mode_))},
                {"layers",
                 {layer_to_json(Conv3x3<T>::kind(), conv1_.params()), layer_to_json(Conv3x3<T>::kind(), conv2_.params()),
                  layer_to_json(Dense<T>::kind(), vis_fc_.params()), layer_to_json(GRUCell<T>::kind(), gru_.params()),
                  layer_to_json(Dense<T>::kind(), head_.params())}}};
    }

    static PolicyNet from_json(const nlohmann::json& j) {
        if (j.value("model", "") != "PolicyNet") throw CheckpointError("not a policy model checkpoint");
        PolicyNet net(policy_mode_from_string(j.at("mode").get<std::string>()));
        const auto& L = j.at("layers");
        if (L.size() != 5) throw CheckpointError("policy model layer count mismatch");
        layer_from_json(L[0], Conv3x3<T>::kind(), net.conv1_.params());
        layer_from_json(L[1], Conv3x3<T>::kind(), net.conv2_.params());
        layer_from_json(L[2], Dense<T>::kind(), net.vis_fc_.params());
        layer_from_json(L[3], GRUCell<T>::kind(), net.gru_.params());
        layer_from_json(L[4], Dense<T>::kind(), net.head_.params());
        return net;
    }

    template <typename U>
    PolicyNet<U> cast() {
        return PolicyNet<U>::from_json(to_json());
    }

private:
    static constexpr int kCropSide = 32;

    PolicyMode mode_;
    Conv3x3<T> conv1_, conv2_;
    Dense<T> vis_fc_;
    GRUCell<T> gru_;
    Dense<T> head_;
    Tanh<T> act1_, act2_, act3_;
    bool has_vis_ = false, has_hap_ = false;
};

}  // namespace skewersim::policy
