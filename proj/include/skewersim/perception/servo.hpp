#pragma once

#include <filesystem>
#include <optional>

#include "skewersim/perception/pose.hpp"
#include "skewersim/simworld/archetypes.hpp"
#include "skewersim/simworld/plate.hpp"
#include "skewersim/tinynn.hpp"

namespace skewersim::perception {

using namespace skewersim::nn;

inline constexpr double kHeatmapSigma = 1.5;  // px
inline constexpr double kTargetLostThreshold = 0.2;

/// Fork and food heatmaps, each kLocalSize x kLocalSize row-major.
struct HeatmapPair {
    std::vector<float> fork, food;

    static Vec2 argmax(const std::vector<float>& m) {
        const auto it = std::max_element(m.begin(), m.end());
        const int k = static_cast<int>(it - m.begin());
        return {static_cast<double>(k % kLocalSize), static_cast<double>(k / kLocalSize)};
    }
};

/// Isotropic Gaussian bump with peak 1 at `p`; all zeros when absent.
inline std::vector<float> gaussian_target(std::optional<Vec2> p, int size = kLocalSize, double sigma = kHeatmapSigma) {
    std::vector<float> m(static_cast<std::size_t>(size * size), 0.0f);
    if (!p) return m;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const double dx = c - p->x, dy = r - p->y;
            m[static_cast<std::size_t>(r * size + c)] = static_cast<float>(std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)));
        }
    return m;
}

/// Separable Gaussian blur of a single-channel map with zero padding.
inline std::vector<double> blur(const std::vector<double>& m, int W, int H, double sigma) {
    const int rad = static_cast<int>(std::ceil(3 * sigma));
    std::vector<double> k(static_cast<std::size_t>(2 * rad + 1));
    double ks = 0;
    for (int i = -rad; i <= rad; ++i) ks += k[static_cast<std::size_t>(i + rad)] = std::exp(-0.5 * i * i / (sigma * sigma));
    for (auto& v : k) v /= ks;
    std::vector<double> tmp(m.size(), 0.0), out(m.size(), 0.0);
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int i = -rad; i <= rad; ++i)
                if (c + i >= 0 && c + i < W) tmp[static_cast<std::size_t>(r * W + c)] += k[static_cast<std::size_t>(i + rad)] * m[static_cast<std::size_t>(r * W + c + i)];
    for (int r = 0; r < H; ++r)
        for (int c = 0; c < W; ++c)
            for (int i = -rad; i <= rad; ++i)
                if (r + i >= 0 && r + i < H) out[static_cast<std::size_t>(r * W + c)] += k[static_cast<std::size_t>(i + rad)] * tmp[static_cast<std::size_t>((r + i) * W + c)];
    return out;
}

/// Fully convolutional heatmap model over a fixed feature stack: centred
/// RGB, the non-plate mask, that mask blurred at two scales, and the
/// offset and distance from the fork pixel. Hidden stages are
/// stride-1 3x3 convolutions with tanh; a last 3x3 conv emits two logit maps.
template <typename T>
class ServoNet {
public:
    static constexpr int kInputChannels = 9;
    static constexpr double kBlurSigmas[2] = {2.0, 4.0};

    explicit ServoNet(std::vector<int> dilations = {1}, int channels = 8) : dilations_(std::move(dilations)), channels_(channels) {
        if (dilations_.empty()) throw ConfigError("servo model needs at least one hidden stage");
        int in = kInputChannels;
        for (int d : dilations_) {
            convs_.emplace_back(in, channels_, 1, d);
            in = channels_;
        }
        convs_.emplace_back(in, 2, 1, 1);
        acts_.resize(dilations_.size());
    }

    void init(Rng& rng) {
        for (auto& c : convs_) c.init(rng);
        // small head so an untrained model outputs ~0.5 everywhere
        for (auto& w : convs_.back().weight().value.data) w *= T(0.1);
    }

    static Tensor<T> input_tensor(const Image& img, Vec2 fork_px = {16.0, 16.0}) {
        const int H = img.height, W = img.width;
        const std::size_t n = static_cast<std::size_t>(H * W);
        Tensor<T> x({kInputChannels, H, W});
        std::vector<double> mask(n);
        for (int r = 0; r < H; ++r)
            for (int c = 0; c < W; ++c) {
                const std::size_t k = static_cast<std::size_t>(r * W + c);
                for (int ch = 0; ch < 3; ++ch) x[static_cast<std::size_t>(ch) * n + k] = static_cast<T>(img.at(r, c, ch) - 0.5f);
                mask[k] = is_plate_or_table(img.pixel(r, c)) ? 0.0 : 1.0;
                x[3 * n + k] = static_cast<T>(2 * mask[k] - 1);
                x[6 * n + k] = static_cast<T>((c - fork_px.x) / 16.0);
                x[7 * n + k] = static_cast<T>((r - fork_px.y) / 16.0);
                x[8 * n + k] = static_cast<T>(std::hypot(c - fork_px.x, r - fork_px.y) / 16.0);
            }
        for (int b = 0; b < 2; ++b) {
            const auto m = blur(mask, W, H, kBlurSigmas[b]);
            for (std::size_t k = 0; k < n; ++k) x[static_cast<std::size_t>(4 + b) * n + k] = static_cast<T>(2 * m[k] - 1);
        }
        return x;
    }

    /// Logits (2, H, W).
    Tensor<T> forward(const Tensor<T>& x) {
        Tensor<T> h = x;
        for (std::size_t k = 0; k + 1 < convs_.size(); ++k) h = acts_[k].forward(convs_[k].forward(h));
        return convs_.back().forward(h);
    }

    void backward(const Tensor<T>& g_logits) {
        Tensor<T> g = convs_.back().backward(g_logits);
        for (std::size_t k = convs_.size() - 1; k-- > 0;) g = convs_[k].backward(acts_[k].backward(g));
    }

    HeatmapPair predict(const Image& img) {
        const auto z = forward(input_tensor(img));
        const std::size_t n = static_cast<std::size_t>(img.width * img.height);
        HeatmapPair hp;
        hp.fork.resize(n);
        hp.food.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            hp.fork[i] = static_cast<float>(sigmoid_t(z[i]));
            hp.food[i] = static_cast<float>(sigmoid_t(z[n + i]));
        }
        return hp;
    }

    std::vector<Param<T>*> params() {
        std::vector<Param<T>*> p;
        for (auto& c : convs_)
            for (auto* q : c.params()) p.push_back(q);
        return p;
    }

    const std::vector<int>& dilations() const { return dilations_; }

    nlohmann::json to_json() {
        nlohmann::json layers = nlohmann::json::array();
        for (auto& c : convs_) layers.push_back(layer_to_json(Conv3x3<T>::kind(), c.params()));
        return {{"model", "ServoNet"}, {"dilations", dilations_}, {"channels", channels_}, {"layers", layers}};
    }

    static ServoNet from_json(const nlohmann::json& j) {
        if (j.value("model", "") != "ServoNet") throw CheckpointError("not a servo model checkpoint");
        ServoNet net(j.at("dilations").get<std::vector<int>>(), j.at("channels").get<int>());
        const auto& layers = j.at("layers");
        if (layers.size() != net.convs_.size()) throw CheckpointError("servo model layer count mismatch");
        for (std::size_t k = 0; k < layers.size(); ++k) layer_from_json(layers[k], Conv3x3<T>::kind(), net.convs_[k].params());
        return net;
    }

    template <typename U>
    ServoNet<U> cast() {
        return ServoNet<U>::from_json(to_json());
    }

private:
    std::vector<int> dilations_;
    int channels_;
    std::vector<Conv3x3<T>> convs_;
    std::vector<Tanh<T>> acts_;
};

enum class ServoMode { Oracle, Learned };

struct ServoReading {
    Vec2 fork_px;
    Vec2 food_px;
    Vec2 offset() const { return food_px - fork_px; }
};

struct ServoOptions {
    ServoMode mode = ServoMode::Oracle;
    double sigma_px = 1.0;
    double gain = 0.5;
    double stop_px = 1.0;
    int max_steps = 20;
    ServoNet<float>* model = nullptr;
};

/// Nearest annotated food centre to the fork; nullopt for an empty frame.
inline std::optional<FoodAnnotation> nearest_food(const LocalImage& local) {
    std::optional<FoodAnnotation> best;
    for (const auto& f : local.visible_food)
        if (!best || (f.center_px - local.fork_px).norm() < (best->center_px - local.fork_px).norm()) best = f;
    return best;
}

inline ServoReading servo_offset(const LocalImage& local, const ServoOptions& opt, Rng& rng) {
    if (opt.mode == ServoMode::Oracle) {
        const auto f = nearest_food(local);
        if (!f) throw TargetLostError("no food in the local frame");
        Vec2 food = f->center_px;
        food.x += gaussian(rng, opt.sigma_px);
        food.y += gaussian(rng, opt.sigma_px);
        return {local.fork_px, food};
    }
    if (!opt.model) throw ModeError("learned servo mode needs a trained heatmap model");
    const auto hp = opt.model->predict(local.pixels);
    if (*std::max_element(hp.food.begin(), hp.food.end()) < kTargetLostThreshold)
        throw TargetLostError("food heatmap peak below threshold");
    return {HeatmapPair::argmax(hp.fork), HeatmapPair::argmax(hp.food)};
}

struct ServoResult {
    sim::ForkState fork;
    Vec2 final_offset_px;
    int steps = 0;
};

/// Coarse-to-fine alignment: place the fork over the pose keypoint at
/// approach height, then repeatedly render, measure and move by gain times
/// the pixel offset until it is within `stop_px` or `max_steps` renders.
inline ServoResult servo_loop(const sim::PlateState& plate, const sim::ForkState& fork, const PoseEstimate& pose,
                              const ServoOptions& opt, Rng& rng) {
    ServoResult res;
    res.fork = fork;
    res.fork.position = {pose.keypoint.x, pose.keypoint.y, pose.keypoint.z + sim::kApproachHeight};
    res.fork.roll = pose.gamma;
    if (opt.max_steps <= 0) {
        const auto local = render_local(plate, {pose.keypoint.x, pose.keypoint.y});
        if (const auto f = nearest_food(local)) res.final_offset_px = f->center_px - local.fork_px;
        return res;
    }
    for (int k = 0; k < opt.max_steps; ++k) {
        const Vec2 xy{res.fork.position.x, res.fork.position.y};
        const auto local = render_local(plate, xy, rng());
        const Vec2 off = servo_offset(local, opt, rng).offset();
        ++res.steps;
        res.final_offset_px = off;
        if (off.norm() <= opt.stop_px) break;
        res.fork.position.x += opt.gain * off.x * local.meters_per_pixel;
        res.fork.position.y -= opt.gain * off.y * local.meters_per_pixel;
    }
    return res;
}

// ---------------------------------------------------------------------------
// Servo dataset and training

struct ServoSample {
    Image image;
    std::optional<Vec2> fork_px;
    std::optional<Vec2> food_px;
    int base_index = 0;
};

struct ServoDataConfig {
    int base_renders = 200;
    int total = 3500;
    double max_start_offset_px = 10.0;
    int max_shift_px = 3;
    double hue_jitter = 0.03;
};

namespace detail {

inline void rgb_to_hsv(const Rgb& c, double& h, double& s, double& v) {
    const double mx = std::max({c[0], c[1], c[2]}), mn = std::min({c[0], c[1], c[2]});
    v = mx;
    s = mx > 0 ? (mx - mn) / mx : 0.0;
    if (mx == mn) {
        h = 0;
        return;
    }
    const double d = mx - mn;
    if (mx == c[0]) h = (c[1] - c[2]) / d;
    else if (mx == c[1]) h = 2 + (c[2] - c[0]) / d;
    else h = 4 + (c[0] - c[1]) / d;
    h /= 6.0;
    if (h < 0) h += 1;
}

/// Mirror about the fork column, integer shift with edge padding, hue rotation.
inline Image transform_scene(const Image& src, bool flip, int sx, int sy, double dhue, int fork_col) {
    Image out(src.width, src.height);
    for (int r = 0; r < src.height; ++r)
        for (int c = 0; c < src.width; ++c) {
            int qc = c - sx, qr = r - sy;
            if (flip) qc = 2 * fork_col - qc;
            qc = std::clamp(qc, 0, src.width - 1);
            qr = std::clamp(qr, 0, src.height - 1);
            Rgb p = src.pixel(qr, qc);
            if (dhue != 0.0) {
                double h, s, v;
                rgb_to_hsv(p, h, s, v);
                if (s > 0) p = hsv_to_rgb(h + dhue, s, v);
            }
            out.set(r, c, p);
        }
    return out;
}

}  // namespace detail

/// Base local renders around random target items, augmented by flips,
/// shifts and hue jitter up to `total` samples. Every sample keeps the fork
/// chevron at its fixed pixel; the food label is the nearest visible centre.
inline std::vector<ServoSample> generate_servo_dataset(const sim::ArchetypeTable& table, std::uint64_t seed,
                                                       const ServoDataConfig& cfg = {}) {
    if (cfg.base_renders <= 0 || cfg.total < cfg.base_renders) throw ConfigError("servo dataset sizes");
    std::vector<std::string> names;
    for (const auto& [name, a] : table)
        if (a.seen) names.push_back(name);
    if (names.empty()) throw ConfigError("no seen archetypes for servo data");
    struct Base {
        Image scene;
        std::optional<Vec2> food;
    };
    std::vector<Base> bases;
    for (int b = 0; b < cfg.base_renders; ++b) {
        Rng rng(derive_seed(seed, 0x5e27, b));
        sim::PlateSpec spec;
        const int n = 1 + static_cast<int>(rng() % 5);
        for (int k = 0; k < n; ++k) spec.archetypes.push_back({names[rng() % names.size()], 1});
        const auto plate = sim::spawn_plate(spec, table, rng());
        const auto& target = plate.items[rng() % plate.items.size()];
        const double r = cfg.max_start_offset_px * kLocalMpp * std::sqrt(uniform(rng, 0, 1));
        const double th = uniform(rng, 0, 2 * std::numbers::pi);
        const Vec2 fork_xy = target.center + Vec2{r * std::cos(th), r * std::sin(th)};
        const auto local = render_local(plate, fork_xy, rng(), false);
        const auto f = nearest_food(local);
        bases.push_back({local.pixels, f ? std::optional<Vec2>(f->center_px) : std::nullopt});
    }
    const Vec2 fork_px{16.0, 16.0};
    std::vector<ServoSample> out;
    out.reserve(static_cast<std::size_t>(cfg.total));
    for (int i = 0; i < cfg.total; ++i) {
        const int b = i % cfg.base_renders;
        const auto& base = bases[static_cast<std::size_t>(b)];
        ServoSample s;
        s.base_index = b;
        s.fork_px = fork_px;
        if (i < cfg.base_renders) {
            s.image = base.scene;
            s.food_px = base.food;
        } else {
            Rng rng(derive_seed(seed, 0xa06, i));
            const bool flip = bernoulli(rng, 0.5);
            const int sx = static_cast<int>(rng() % (2 * cfg.max_shift_px + 1)) - cfg.max_shift_px;
            const int sy = static_cast<int>(rng() % (2 * cfg.max_shift_px + 1)) - cfg.max_shift_px;
            const double dh = uniform(rng, -cfg.hue_jitter, cfg.hue_jitter);
            s.image = detail::transform_scene(base.scene, flip, sx, sy, dh, 16);
            if (base.food) {
                Vec2 p = *base.food;
                if (flip) p.x = 2 * fork_px.x - p.x;
                s.food_px = p + Vec2{static_cast<double>(sx), static_cast<double>(sy)};
            }
        }
        draw_fork(s.image, fork_px);
        out.push_back(std::move(s));
    }
    return out;
}

struct ServoTrainConfig {
    int epochs = 6;
    int batch_size = 16;
    double lr = 3e-3;
    std::uint64_t seed = 0;
    std::vector<int> dilations = {1};
    int channels = 8;
};

struct ServoTrainResult {
    ServoNet<float> model;
    double final_loss = 0.0;
    std::vector<double> epoch_loss;
};

inline Tensor<float> servo_targets(const ServoSample& s) {
    const auto f = gaussian_target(s.fork_px, s.image.width), g = gaussian_target(s.food_px, s.image.width);
    Tensor<float> t({2, s.image.height, s.image.width});
    std::copy(f.begin(), f.end(), t.data.begin());
    std::copy(g.begin(), g.end(), t.data.begin() + static_cast<long>(f.size()));
    return t;
}

/// Mean per-pixel BCE of the model over `data`.
inline double servo_loss(ServoNet<float>& model, const std::vector<ServoSample>& data) {
    double acc = 0;
    for (const auto& s : data) acc += sigmoid_bce(model.forward(ServoNet<float>::input_tensor(s.image)), servo_targets(s)).loss;
    return data.empty() ? 0.0 : acc / static_cast<double>(data.size());
}

inline ServoTrainResult train_servo_model(const std::vector<ServoSample>& data, const ServoTrainConfig& cfg = {}) {
    if (data.empty()) throw ConfigError("empty servo dataset");
    if (cfg.batch_size <= 0 || cfg.epochs < 0) throw ConfigError("servo training config");
    ServoTrainResult res{ServoNet<float>(cfg.dilations, cfg.channels), 0.0, {}};
    Rng rng(derive_seed(cfg.seed, 0x5e4f));
    res.model.init(rng);
    Adam<float> opt(res.model.params(), {cfg.lr});
    std::vector<Tensor<float>> inputs, targets;
    for (const auto& s : data) {
        inputs.push_back(ServoNet<float>::input_tensor(s.image));
        targets.push_back(servo_targets(s));
    }
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);
    for (int e = 0; e < cfg.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), rng);
        double total = 0;
        for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(cfg.batch_size));
            opt.zero_grad();
            for (std::size_t k = b; k < end; ++k) {
                auto lg = sigmoid_bce(res.model.forward(inputs[order[k]]), targets[order[k]]);
                total += lg.loss;
                for (auto& g : lg.grad.data) g /= static_cast<float>(end - b);
                res.model.backward(lg.grad);
            }
            opt.step();
        }
        res.epoch_loss.push_back(total / static_cast<double>(data.size()));
    }
    res.final_loss = servo_loss(res.model, data);
    return res;
}

struct KeypointError {
    double fork = 0.0;
    double food = 0.0;
    int count = 0;
};

/// Mean argmax distance to the annotations over samples carrying both labels.
inline KeypointError keypoint_error(ServoNet<float>& model, const std::vector<ServoSample>& data) {
    KeypointError e;
    for (const auto& s : data) {
        if (!s.fork_px || !s.food_px) continue;
        const auto hp = model.predict(s.image);
        e.fork += (HeatmapPair::argmax(hp.fork) - *s.fork_px).norm();
        e.food += (HeatmapPair::argmax(hp.food) - *s.food_px).norm();
        ++e.count;
    }
    if (e.count) {
        e.fork /= e.count;
        e.food /= e.count;
    }
    return e;
}

/// Train / held-out split by base render: every tenth scene is held out.
inline std::pair<std::vector<ServoSample>, std::vector<ServoSample>> split_servo_holdout(const std::vector<ServoSample>& data) {
    std::pair<std::vector<ServoSample>, std::vector<ServoSample>> out;
    for (const auto& s : data) (s.base_index % 10 == 9 ? out.second : out.first).push_back(s);
    return out;
}

/// Writes `servo.jsonl` plus one PPM per sample under `dir/images`.
inline void write_servo_dataset(const std::filesystem::path& dir, const std::vector<ServoSample>& data) {
    std::filesystem::create_directories(dir / "images");
    std::ofstream out(dir / "servo.jsonl");
    if (!out) throw Error("cannot write servo dataset in " + dir.string());
    auto pt = [](const std::optional<Vec2>& p) { return p ? nlohmann::json{p->x, p->y} : nlohmann::json(nullptr); };
    for (std::size_t i = 0; i < data.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "images/%06zu.ppm", i);
        write_ppm((dir / name).string(), data[i].image);
        out << nlohmann::json{{"image_ref", name}, {"fork_px", pt(data[i].fork_px)}, {"food_px", pt(data[i].food_px)},
                              {"base_index", data[i].base_index}}
                   .dump()
            << '\n';
    }
}

inline std::vector<ServoSample> read_servo_dataset(const std::filesystem::path& dir) {
    std::ifstream in(dir / "servo.jsonl");
    if (!in) throw NotFoundError((dir / "servo.jsonl").string());
    auto pt = [](const nlohmann::json& j) { return j.is_null() ? std::optional<Vec2>() : Vec2{j[0].get<double>(), j[1].get<double>()}; };
    std::vector<ServoSample> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        out.push_back({read_ppm((dir / j.at("image_ref").get<std::string>()).string()), pt(j.at("fork_px")),
                       pt(j.at("food_px")), j.value("base_index", 0)});
    }
    return out;
}

}  // namespace skewersim::perception
