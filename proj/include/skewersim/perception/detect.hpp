#pragma once

#include <optional>
#include <vector>

#include "skewersim/perception/render.hpp"

namespace skewersim::perception {

struct Box {
    double cx = 0, cy = 0, w = 0, h = 0;  // px

    bool contains(Vec2 p) const { return std::abs(p.x - cx) <= 0.5 * w && std::abs(p.y - cy) <= 0.5 * h; }
};

struct Detection {
    Box box;
    bool is_false_positive = false;  // ground truth only
    int item_id = -1;                // ground truth only
};

struct DetectionNoise {
    double p_false_negative = 0.05;
    double p_false_positive = 0.02;
    double jitter_px = 2.0;

    static DetectionNoise none() { return {0.0, 0.0, 0.0}; }
};

/// Axis-aligned pixel hull of an item's ellipse.
inline Box true_box(const sim::FoodItem& it, const OverheadImage& img) {
    const double a = 0.5 * it.major_axis, b = 0.5 * it.minor_axis;
    const double c = std::cos(it.axis_angle), s = std::sin(it.axis_angle);
    const double ex = std::sqrt(a * a * c * c + b * b * s * s);
    const double ey = std::sqrt(a * a * s * s + b * b * c * c);
    const Vec2 p = img.camera().to_px(it.center);
    return {p.x, p.y, 2 * ex / img.meters_per_pixel, 2 * ey / img.meters_per_pixel};
}

/// Shrinks a box so it lies within the image, keeping at least one pixel.
inline Box clip_box(Box b, const OverheadImage& img) {
    const double lo = -0.5, hi_x = img.pixels.width - 0.5, hi_y = img.pixels.height - 0.5;
    double x0 = std::clamp(b.cx - 0.5 * b.w, lo, hi_x - 1), x1 = std::clamp(b.cx + 0.5 * b.w, x0 + 1, hi_x);
    double y0 = std::clamp(b.cy - 0.5 * b.h, lo, hi_y - 1), y1 = std::clamp(b.cy + 0.5 * b.h, y0 + 1, hi_y);
    return {0.5 * (x0 + x1), 0.5 * (y0 + y1), x1 - x0, y1 - y0};
}

/// Detector response for one item: dropped with p_FN, otherwise the jittered hull.
inline std::optional<Detection> detect_item(const sim::FoodItem& it, const OverheadImage& img, Rng& rng,
                                            const DetectionNoise& noise = {}) {
    if (bernoulli(rng, noise.p_false_negative)) return std::nullopt;
    Box b = true_box(it, img);
    b.cx += gaussian(rng, noise.jitter_px);
    b.cy += gaussian(rng, noise.jitter_px);
    return Detection{clip_box(b, img), false, it.id};
}

/// With probability p_FP, a box over bare plate that matches no item.
inline std::optional<Detection> spurious_detection(const sim::PlateState& plate, const OverheadImage& img, Rng& rng,
                                                   const DetectionNoise& noise = {}) {
    if (!bernoulli(rng, noise.p_false_positive)) return std::nullopt;
    const Camera cam = img.camera();
    for (int attempt = 0; attempt < 200; ++attempt) {
        const double r = plate.plate_radius * 0.8 * std::sqrt(uniform(rng, 0.0, 1.0));
        const double th = uniform(rng, 0.0, 2 * std::numbers::pi);
        const Vec2 w{r * std::cos(th), r * std::sin(th)};
        const double half = uniform(rng, 4.0, 7.0);
        bool clear = true;
        for (const auto& it : plate.items)
            if ((it.center - w).norm() < 0.5 * it.major_axis + 1.5 * half * img.meters_per_pixel) clear = false;
        if (!clear) continue;
        const Vec2 p = cam.to_px(w);
        return Detection{clip_box({p.x, p.y, 2 * half, 2 * half}, img), true, -1};
    }
    return std::nullopt;
}

/// Noisy detector over the whole image using one rng stream.
inline std::vector<Detection> detect_items(const OverheadImage& img, const sim::PlateState& plate, Rng& rng,
                                           const DetectionNoise& noise = {}) {
    std::vector<Detection> out;
    for (const auto& it : plate.items)
        if (auto d = detect_item(it, img, rng, noise)) out.push_back(*d);
    if (auto d = spurious_detection(plate, img, rng, noise)) out.push_back(*d);
    return out;
}

}  // namespace skewersim::perception
