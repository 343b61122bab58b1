#pragma once

#include "skewersim/perception/detect.hpp"

namespace skewersim::perception {

inline constexpr double kMaxEstimatedHeight = 0.06;
/// Relative eigenvalue gap below which the blob is treated as circular.
inline constexpr double kCircularTolerance = 0.05;

struct PoseEstimate {
    Vec3 keypoint;
    double gamma = 0.0;  // [0, pi)
};

/// Keypoint from the intensity-weighted centroid of non-plate pixels inside
/// the box; roll is the principal axis plus 90 degrees so the tines cross the
/// long axis. Depth comes from the nominal height of the item under the
/// keypoint (nearest item whose centre falls in the box as a fallback).
inline PoseEstimate estimate_pose(const OverheadImage& img, const Box& box, const sim::PlateState& plate) {
    const Camera cam = img.camera();
    const int c0 = std::max(0, static_cast<int>(std::ceil(box.cx - 0.5 * box.w)));
    const int c1 = std::min(img.pixels.width - 1, static_cast<int>(std::floor(box.cx + 0.5 * box.w)));
    const int r0 = std::max(0, static_cast<int>(std::ceil(box.cy - 0.5 * box.h)));
    const int r1 = std::min(img.pixels.height - 1, static_cast<int>(std::floor(box.cy + 0.5 * box.h)));
    double sw = 0, sx = 0, sy = 0;
    struct Px {
        double x, y, w;
    };
    std::vector<Px> pts;
    for (int r = r0; r <= r1; ++r)
        for (int c = c0; c <= c1; ++c) {
            const Rgb p = img.pixels.pixel(r, c);
            if (is_plate_or_table(p)) continue;
            const double w = color_distance(p, kPlateGray);
            // world-oriented axes: x right, y up
            pts.push_back({static_cast<double>(c), -static_cast<double>(r), w});
            sw += w;
            sx += w * c;
            sy += w * -r;
        }
    if (pts.empty() || sw <= 0) throw NoItemError("no food pixels inside the box");
    const double mx = sx / sw, my = sy / sw;
    double cxx = 0, cyy = 0, cxy = 0;
    for (const auto& p : pts) {
        cxx += p.w * (p.x - mx) * (p.x - mx);
        cyy += p.w * (p.y - my) * (p.y - my);
        cxy += p.w * (p.x - mx) * (p.y - my);
    }
    const double tr = cxx + cyy;
    const double gap = std::sqrt((cxx - cyy) * (cxx - cyy) + 4 * cxy * cxy);
    double gamma = 0.0;
    if (tr > 0 && gap / tr >= kCircularTolerance) {
        gamma = 0.5 * std::atan2(2 * cxy, cxx - cyy) + 0.5 * std::numbers::pi;
        gamma = std::fmod(gamma, std::numbers::pi);
        if (gamma < 0) gamma += std::numbers::pi;
    }

    const Vec2 world = cam.to_world({mx, -my});
    const sim::FoodItem* item = plate.item_at(world);
    if (!item) {
        double best = 1e9;
        for (const auto& it : plate.items) {
            const Vec2 p = cam.to_px(it.center);
            const double d = (it.center - world).norm();
            if (box.contains(p) && d < best) best = d, item = &it;
        }
    }
    if (!item) throw NoItemError("no item associated with the box");
    const double z = plate.plate_z + std::clamp(item->nominal_height, 0.0, kMaxEstimatedHeight);
    return {{world.x, world.y, z}, gamma};
}

}  // namespace skewersim::perception
