#pragma once

#include <vector>

#include "skewersim/perception/image.hpp"
#include "skewersim/simworld/types.hpp"

namespace skewersim::perception {

inline constexpr int kOverheadSize = 128;
inline constexpr double kOverheadMpp = 0.28 / kOverheadSize;
inline constexpr int kLocalSize = 32;
inline constexpr double kLocalMpp = 0.0025;
inline constexpr double kHueNoise = 0.02;
inline constexpr Rgb kPlateGray = {0.85f, 0.85f, 0.85f};
inline constexpr Rgb kBackground = {0.18f, 0.16f, 0.15f};
inline constexpr Rgb kForkWhite = {1.0f, 1.0f, 1.0f};
/// Max-channel distance under which a pixel counts as plate or table.
inline constexpr float kGrayTolerance = 0.06f;

/// Pixel coordinates are (col, row) with pixel centres at integer values;
/// world y points up the image.
struct Camera {
    Vec2 center;       // world point imaged at `center_px`
    Vec2 center_px;
    double mpp = kOverheadMpp;

    Vec2 to_px(Vec2 w) const { return {center_px.x + (w.x - center.x) / mpp, center_px.y - (w.y - center.y) / mpp}; }
    Vec2 to_world(Vec2 px) const { return {center.x + (px.x - center_px.x) * mpp, center.y - (px.y - center_px.y) * mpp}; }
};

struct OverheadImage {
    Image pixels;
    double meters_per_pixel = kOverheadMpp;
    double plate_z = 0.0;

    Camera camera() const {
        const double c = 0.5 * (pixels.width - 1);
        return {{0.0, 0.0}, {c, c}, meters_per_pixel};
    }
};

/// Ground-truth annotation carried with a local render; never shown to a policy.
struct FoodAnnotation {
    int item_id = -1;
    Vec2 center_px;
};

struct LocalImage {
    Image pixels;
    Vec2 camera_center;  // world xy under the fork tines
    double meters_per_pixel = kLocalMpp;
    Vec2 fork_px{16.0, 16.0};
    std::vector<FoodAnnotation> visible_food;

    Camera camera() const { return {camera_center, fork_px, meters_per_pixel}; }
};

inline float color_distance(const Rgb& a, const Rgb& b) {
    return std::max({std::abs(a[0] - b[0]), std::abs(a[1] - b[1]), std::abs(a[2] - b[2])});
}

inline bool is_plate_or_table(const Rgb& c) {
    return color_distance(c, kPlateGray) <= kGrayTolerance || color_distance(c, kBackground) <= kGrayTolerance;
}

namespace detail {

/// Paints plate and items through `cam` into `img`; returns per-item pixel counts.
inline std::vector<int> paint_scene(Image& img, const sim::PlateState& plate, const Camera& cam, std::uint64_t seed) {
    Rng rng(derive_seed(seed, 0x72656e64));
    std::vector<int> counts(plate.items.size(), 0);
    std::normal_distribution<double> hue_noise(0.0, kHueNoise);
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c) {
            const Vec2 w = cam.to_world({static_cast<double>(c), static_cast<double>(r)});
            img.set(r, c, w.norm() <= plate.plate_radius ? kPlateGray : kBackground);
            for (std::size_t k = 0; k < plate.items.size(); ++k) {
                const auto& it = plate.items[k];
                if (!it.contains(w)) continue;
                const auto& a = it.appearance;
                img.set(r, c, hsv_to_rgb(a.base_hue + hue_noise(rng), a.saturation, a.value));
                ++counts[k];
                break;
            }
        }
    return counts;
}

}  // namespace detail

inline OverheadImage render_overhead(const sim::PlateState& plate, std::uint64_t render_seed = 0) {
    OverheadImage out;
    out.pixels = Image(kOverheadSize, kOverheadSize);
    out.plate_z = plate.plate_z;
    detail::paint_scene(out.pixels, plate, out.camera(), render_seed);
    return out;
}

/// Two-pixel-thick white chevron with its apex on the tines midpoint.
inline void draw_fork(Image& img, Vec2 fork_px) {
    const int fc = static_cast<int>(std::lround(fork_px.x)), fr = static_cast<int>(std::lround(fork_px.y));
    for (int d = 0; d < 4; ++d)
        for (int t = 0; t < 2; ++t)
            for (int side : {-1, 1}) {
                const int r = fr + d + t, c = fc + side * d;
                if (img.inside(r, c)) img.set(r, c, kForkWhite);
            }
}

/// Eye-in-hand view centred on the fork tines at `fork_xy`.
inline LocalImage render_local(const sim::PlateState& plate, Vec2 fork_xy, std::uint64_t render_seed = 0,
                               bool with_fork = true) {
    LocalImage out;
    out.pixels = Image(kLocalSize, kLocalSize);
    out.camera_center = fork_xy;
    const Camera cam = out.camera();
    const auto counts = detail::paint_scene(out.pixels, plate, cam, render_seed);
    for (std::size_t k = 0; k < plate.items.size(); ++k)
        if (counts[k] > 0) out.visible_food.push_back({plate.items[k].id, cam.to_px(plate.items[k].center)});
    if (with_fork) draw_fork(out.pixels, out.fork_px);
    return out;
}

}  // namespace skewersim::perception
