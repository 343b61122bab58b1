#pragma once

#include <algorithm>

#include "skewersim/perception.hpp"
#include "skewersim/policy/example.hpp"
#include "skewersim/simworld.hpp"

namespace skewersim::policy {

inline constexpr int kCropSize = 32;

/// Square patch of the overhead image centred on `center_px`, edge-clamped.
inline Image crop_overhead(const perception::OverheadImage& img, Vec2 center_px, int size = kCropSize) {
    Image out(size, size);
    const int c0 = static_cast<int>(std::lround(center_px.x)) - size / 2;
    const int r0 = static_cast<int>(std::lround(center_px.y)) - size / 2;
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c) {
            const int rr = std::clamp(r0 + r, 0, img.pixels.height - 1), cc = std::clamp(c0 + c, 0, img.pixels.width - 1);
            out.set(r, c, img.pixels.pixel(rr, cc));
        }
    return out;
}

/// Archetype visiting order: misleading twins adjacent, then hard and soft
/// alternating, so any prefix of whole cycles is label balanced and pairs stay complete.
inline std::vector<std::string> archetype_cycle(const sim::ArchetypeTable& table) {
    std::map<std::string, std::vector<std::string>> groups;
    std::vector<std::string> hard, soft;
    for (const auto& [name, a] : table) {
        if (!a.seen) continue;
        if (!a.misleading_group.empty()) groups[a.misleading_group].push_back(name);
        else (a.compliance == sim::Compliance::Hard ? hard : soft).push_back(name);
    }
    std::vector<std::string> cycle;
    for (auto& [g, names] : groups) {
        std::sort(names.begin(), names.end(), [&](const std::string& x, const std::string& y) {
            return table.at(x).compliance == sim::Compliance::Hard && table.at(y).compliance != sim::Compliance::Hard;
        });
        cycle.insert(cycle.end(), names.begin(), names.end());
    }
    for (std::size_t i = 0; i < std::max(hard.size(), soft.size()); ++i) {
        if (i < hard.size()) cycle.push_back(hard[i]);
        if (i < soft.size()) cycle.push_back(soft[i]);
    }
    return cycle;
}

/// One probe interaction on a single-item scene. Everything visual is drawn
/// from `seed` before the material matters, so misleading twins given the
/// same seed produce pixel-identical images.
inline Example make_example(const sim::ArchetypeTable& table, const std::string& archetype, std::uint64_t seed) {
    const auto& arch = table.at(archetype);
    Rng rng(seed);
    const auto plate = sim::spawn_plate({"", {{archetype, 1}}}, table, rng());
    const auto& item = plate.items.front();
    const auto overhead = perception::render_overhead(plate, rng());
    const auto box = perception::true_box(item, overhead);
    const auto pose = perception::estimate_pose(overhead, box, plate);
    perception::ServoOptions servo;
    const auto s = perception::servo_loop(plate, {}, pose, servo, rng);
    const Vec2 xy{s.fork.position.x, s.fork.position.y};

    Example e;
    e.archetype = archetype;
    e.compliance = item.material.compliance_class;
    e.label = label_for(e.compliance);
    e.overhead_crop = crop_overhead(overhead, overhead.camera().to_px({pose.keypoint.x, pose.keypoint.y}));
    e.image = perception::render_local(plate, xy, rng()).pixels;

    const auto probe = sim::execute_primitive(plate, s.fork, sim::Action::probe({xy.x, xy.y, pose.keypoint.z}, pose.gamma), rng);
    e.trace = probe.trace->samples;
    if (!arch.misleading_group.empty()) e.tags |= kMisleadingPair;
    if (arch.heterogeneous()) e.tags |= kHeterogeneousContact;
    if (probe.plate_contact && e.compliance == sim::Compliance::Soft) e.tags |= kThinPlateContact;
    return e;
}

struct DatasetSplit {
    std::vector<Example> train;
    std::vector<Example> test;
};

/// n_base training and n_test held-out examples from disjoint seed streams.
/// Twins at the same cycle position share their scene seed.
inline DatasetSplit generate_dataset(const sim::ArchetypeTable& table, int n_base, std::uint64_t seed, int n_test = 60) {
    bool has_hard = false, has_soft = false;
    for (const auto& [n, a] : table)
        if (a.seen) (a.compliance == sim::Compliance::Hard ? has_hard : has_soft) = true;
    if (!has_hard || !has_soft) throw ConfigError("archetype table needs both hard and soft seen archetypes");
    if (n_base <= 0 || n_test < 0) throw ConfigError("dataset sizes must be positive");
    const auto cycle = archetype_cycle(table);
    auto build = [&](int n, std::uint64_t split) {
        std::vector<Example> out;
        for (int i = 0; i < n; ++i) {
            const auto& name = cycle[static_cast<std::size_t>(i) % cycle.size()];
            const auto& group = table.at(name).misleading_group;
            const std::uint64_t key = fnv1a(group.empty() ? name : "group:" + group);
            const std::uint64_t pass = static_cast<std::uint64_t>(i) / cycle.size();
            out.push_back(make_example(table, name, derive_seed(seed, split, pass, key)));
        }
        return out;
    };
    return {build(n_base, 1), build(n_test, 2)};
}

struct AugmentationConfig {
    double flip_prob = 0.5;
    double rotation_deg = 10.0;
    int translate_px = 2;
    double hue_sigma = 0.02;
    double time_scale_lo = 0.9;
    double time_scale_hi = 1.1;
    int shift_samples = 2;
    int copies = 8;

    static AugmentationConfig identity(int copies = 1) { return {0.0, 0.0, 0, 0.0, 1.0, 1.0, 0, copies}; }

    void validate() const {
        if (copies < 1) throw ConfigError("augmentation copies must be >= 1");
        if (!(time_scale_lo > 0 && time_scale_hi < 2 && time_scale_lo <= time_scale_hi))
            throw ConfigError("time-scale range must lie inside (0, 2)");
        if (flip_prob < 0 || flip_prob > 1 || rotation_deg < 0 || translate_px < 0 || hue_sigma < 0 || shift_samples < 0)
            throw ConfigError("augmentation magnitudes must be non-negative");
    }
};

/// Resamples a trace at times u*k (linear interpolation, edge-held) and then
/// shifts it by `shift` samples with edge padding. Length is preserved.
inline std::vector<double> warp_trace(const std::vector<double>& x, double u, int shift) {
    const int n = static_cast<int>(x.size());
    std::vector<double> scaled(x.size());
    for (int k = 0; k < n; ++k) {
        const double t = std::min(u * k, static_cast<double>(n - 1));
        const int i = static_cast<int>(std::floor(t));
        const int j = std::min(i + 1, n - 1);
        const double f = t - i;
        scaled[static_cast<std::size_t>(k)] = (1 - f) * x[static_cast<std::size_t>(i)] + f * x[static_cast<std::size_t>(j)];
    }
    std::vector<double> out(x.size());
    for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = scaled[static_cast<std::size_t>(std::clamp(k - shift, 0, n - 1))];
    return out;
}

/// Flip about column `pivot`, rotate about it by `deg`, translate, rotate hue.
inline Image warp_image(const Image& src, bool flip, double deg, int tx, int ty, double dhue, Vec2 pivot) {
    Image out(src.width, src.height);
    const double th = deg2rad(deg), c = std::cos(th), s = std::sin(th);
    for (int r = 0; r < src.height; ++r)
        for (int q = 0; q < src.width; ++q) {
            // inverse map: undo translation, rotation, then flip
            const double x = q - tx - pivot.x, y = r - ty - pivot.y;
            double sx = c * x + s * y + pivot.x;
            const double sy = -s * x + c * y + pivot.y;
            if (flip) sx = 2 * pivot.x - sx;
            const int cc = std::clamp(static_cast<int>(std::lround(sx)), 0, src.width - 1);
            const int rr = std::clamp(static_cast<int>(std::lround(sy)), 0, src.height - 1);
            perception::Rgb p = src.pixel(rr, cc);
            if (dhue != 0.0) {
                double h, sat, v;
                perception::detail::rgb_to_hsv(p, h, sat, v);
                if (sat > 0) p = perception::hsv_to_rgb(h + dhue, sat, v);
            }
            out.set(r, q, p);
        }
    return out;
}

inline std::vector<Example> augment(const Example& e, const AugmentationConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<Example> out;
    out.reserve(static_cast<std::size_t>(cfg.copies));
    for (int k = 0; k < cfg.copies; ++k) {
        Example a = e;
        const bool flip = bernoulli(rng, cfg.flip_prob);
        const double deg = cfg.rotation_deg > 0 ? uniform(rng, -cfg.rotation_deg, cfg.rotation_deg) : 0.0;
        const int tx = cfg.translate_px > 0 ? static_cast<int>(rng() % static_cast<unsigned>(2 * cfg.translate_px + 1)) - cfg.translate_px : 0;
        const int ty = cfg.translate_px > 0 ? static_cast<int>(rng() % static_cast<unsigned>(2 * cfg.translate_px + 1)) - cfg.translate_px : 0;
        const double dh = gaussian(rng, cfg.hue_sigma);
        const double u = cfg.time_scale_hi > cfg.time_scale_lo ? uniform(rng, cfg.time_scale_lo, cfg.time_scale_hi) : cfg.time_scale_lo;
        const int sh = cfg.shift_samples > 0 ? static_cast<int>(rng() % static_cast<unsigned>(2 * cfg.shift_samples + 1)) - cfg.shift_samples : 0;
        const bool identity = !flip && deg == 0.0 && tx == 0 && ty == 0 && dh == 0.0;
        if (!identity) {
            a.image = warp_image(e.image, flip, deg, tx, ty, dh, {16.0, 16.0});
            if (e.overhead_crop.width > 0) {
                const double pc = 0.5 * (e.overhead_crop.width - 1);
                a.overhead_crop = warp_image(e.overhead_crop, flip, deg, tx, ty, dh, {pc, pc});
            }
        }
        if (u != 1.0 || sh != 0) a.trace = warp_trace(e.trace, u, sh);
        out.push_back(std::move(a));
    }
    return out;
}

inline std::vector<Example> augment_all(const std::vector<Example>& base, const AugmentationConfig& cfg, std::uint64_t seed) {
    std::vector<Example> out;
    out.reserve(base.size() * static_cast<std::size_t>(cfg.copies));
    for (std::size_t i = 0; i < base.size(); ++i) {
        Rng rng(derive_seed(seed, 0xa7, i));
        auto v = augment(base[i], cfg, rng);
        std::move(v.begin(), v.end(), std::back_inserter(out));
    }
    return out;
}

}  // namespace skewersim::policy
