#pragma once

#include <fstream>
#include <numeric>

#include "skewersim/policy/dataset.hpp"
#include "skewersim/policy/model.hpp"

namespace skewersim::policy {

struct PolicyTrainConfig {
    int epochs = 30;
    int batch = 32;
    double lr = 2e-3;

    nlohmann::json to_json() const { return {{"epochs", epochs}, {"batch", batch}, {"lr", lr}}; }
    static PolicyTrainConfig from_json(const nlohmann::json& j) {
        PolicyTrainConfig c;
        c.epochs = j.value("epochs", c.epochs);
        c.batch = j.value("batch", c.batch);
        c.lr = j.value("lr", c.lr);
        if (c.epochs < 1 || c.batch < 1 || !(c.lr > 0)) throw ConfigError("training config needs epochs, batch >= 1 and lr > 0");
        return c;
    }
};

struct PolicyTrainResult {
    PolicyNet<float> model;
    std::vector<double> epoch_loss;  // mean cross-entropy per epoch
};

inline PolicyTrainResult train_policy(const std::vector<Example>& data, PolicyMode mode, const PolicyTrainConfig& cfg,
                                      std::uint64_t seed) {
    if (data.empty()) throw ConfigError("training set is empty");
    if (cfg.epochs < 1 || cfg.batch < 1 || !(cfg.lr > 0)) throw ConfigError("invalid training config");
    PolicyTrainResult res{PolicyNet<float>(mode), {}};
    auto& net = res.model;
    Rng rng(derive_seed(seed, 0x706f6c));
    net.init(rng);
    auto params = net.params();
    Adam<float> opt(params, AdamConfig{cfg.lr});
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int ep = 0; ep < cfg.epochs; ++ep) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0;
        for (std::size_t b0 = 0; b0 < order.size(); b0 += static_cast<std::size_t>(cfg.batch)) {
            const std::size_t b1 = std::min(order.size(), b0 + static_cast<std::size_t>(cfg.batch));
            const float scale = 1.0f / static_cast<float>(b1 - b0);
            opt.zero_grad();
            for (std::size_t k = b0; k < b1; ++k) {
                const Example& e = data[order[k]];
                auto lg = cross_entropy(net.forward(e), e.label);
                total += lg.loss;
                for (auto& g : lg.grad.data) g *= scale;
                net.backward(lg.grad);
            }
            opt.step();
        }
        res.epoch_loss.push_back(total / static_cast<double>(data.size()));
    }
    return res;
}

struct Inference {
    sim::Primitive primitive;
    std::array<double, 2> likelihood;
};

/// Ties go to AngledSkewer.
inline sim::Primitive decide(const std::array<double, 2>& p) {
    return p[kVertical] > p[kAngled] ? sim::Primitive::VerticalSkewer : sim::Primitive::AngledSkewer;
}

inline Inference infer_primitive(PolicyNet<float>& model, const Image* image, const std::vector<double>* trace) {
    const auto p = softmax(model.forward(image, trace));
    const std::array<double, 2> lk{p[0], p[1]};
    return {decide(lk), lk};
}

inline Inference infer_primitive(PolicyNet<float>& model, const Example& e) {
    return infer_primitive(model, model.view_of(e), &e.trace);
}

struct Accuracy {
    int correct = 0;
    int total = 0;
    double value() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct EvalReport {
    Accuracy overall, vertical, angled;
    std::map<std::string, Accuracy> by_tag;  // keyed by tag name
};

inline EvalReport evaluate_policy(PolicyNet<float>& model, const std::vector<Example>& xs) {
    EvalReport r;
    for (const auto& e : xs) {
        const int pred = infer_primitive(model, e).primitive == sim::Primitive::VerticalSkewer ? kVertical : kAngled;
        const int ok = pred == e.label;
        auto bump = [&](Accuracy& a) { a.correct += ok, ++a.total; };
        bump(r.overall);
        bump(e.label == kVertical ? r.vertical : r.angled);
        for (const auto& t : tag_names(e.tags)) bump(r.by_tag[t]);
    }
    return r;
}

/// Accuracy over examples carrying any tag in `mask`.
inline Accuracy accuracy_on(PolicyNet<float>& model, const std::vector<Example>& xs, unsigned mask) {
    Accuracy a;
    for (const auto& e : xs) {
        if (!(e.tags & mask)) continue;
        const int pred = infer_primitive(model, e).primitive == sim::Primitive::VerticalSkewer ? kVertical : kAngled;
        a.correct += pred == e.label;
        ++a.total;
    }
    return a;
}

inline std::string format_number(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

/// CSV: e0..e47,label,archetype.
inline void export_embeddings(PolicyNet<float>& model, const std::vector<Example>& xs, std::ostream& out) {
    if (model.mode() != PolicyMode::Multimodal) throw ModeError("embeddings are only defined for Multimodal models");
    for (int i = 0; i < kEmbedDim; ++i) out << 'e' << i << ',';
    out << "label,archetype\n";
    for (const auto& e : xs) {
        const auto z = model.embed(e);
        for (float v : z.data) out << format_number(v) << ',';
        out << sim::to_string(label_primitive(e.label)) << ',' << e.archetype << '\n';
    }
}

struct SweepRow {
    double fraction;
    std::uint64_t seed;
    double overall, vertical, angled;
};

/// Subsamples the base set (order-preserving), augments, trains Multimodal, tests.
inline std::vector<SweepRow> sample_efficiency_sweep(const std::vector<Example>& base, const std::vector<Example>& test,
                                                     const std::vector<double>& fractions, const std::vector<std::uint64_t>& seeds,
                                                     const AugmentationConfig& aug, const PolicyTrainConfig& cfg) {
    for (double f : fractions)
        if (!(f > 0) || f > 1) throw ConfigError("sweep fractions must lie in (0, 1]");
    std::vector<SweepRow> rows;
    for (double f : fractions)
        for (auto s : seeds) {
            const auto n = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(f * static_cast<double>(base.size()))));
            std::vector<std::size_t> idx(base.size());
            std::iota(idx.begin(), idx.end(), 0);
            if (n < base.size()) {
                Rng rng(derive_seed(s, 0x737562));
                std::shuffle(idx.begin(), idx.end(), rng);
                idx.resize(n);
                std::sort(idx.begin(), idx.end());
            }
            std::vector<Example> sub;
            for (auto i : idx) sub.push_back(base[i]);
            auto model = train_policy(augment_all(sub, aug, s), PolicyMode::Multimodal, cfg, s).model;
            const auto r = evaluate_policy(model, test);
            rows.push_back({f, s, r.overall.value(), r.vertical.value(), r.angled.value()});
        }
    return rows;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "fraction,seed,overall_acc,vertical_acc,angled_acc\n";
    for (const auto& r : rows)
        out << format_number(r.fraction) << ',' << r.seed << ',' << format_number(r.overall) << ',' << format_number(r.vertical)
            << ',' << format_number(r.angled) << '\n';
}

}  // namespace skewersim::policy
