#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "skewersim/common.hpp"

namespace skewersim::sim {

// Controller and sensor constants.
inline constexpr double kControlDt = 0.05;         // 20 Hz controller
inline constexpr double kSubstepDt = 0.001;        // 1 kHz force sensing
inline constexpr int kSubstepsPerControl = 50;
inline constexpr double kApproachHeight = 0.01;    // probe starts 1 cm above the estimated top
inline constexpr double kContactThreshold = 0.1;   // N
inline constexpr double kForceLimit = 25.0;        // N, F_max
inline constexpr double kProbeSpeed = 0.02;        // m/s
inline constexpr double kVerticalSpeed = 0.17;     // m/s
inline constexpr double kAngledSpeed = 0.08;       // m/s
inline constexpr double kAngledTilt = 65.0 * std::numbers::pi / 180.0;
inline constexpr double kScoopPitch = 80.0 * std::numbers::pi / 180.0;
inline constexpr double kTiltRampTravel = 0.0015;  // m of in-contact travel to reach full tilt
inline constexpr double kSensorNoise = 0.05;       // N
inline constexpr int kTraceLength = 26;
inline constexpr double kPlateClearance = 0.002;   // fork z may dip this far below plate_z
inline constexpr double kPlateStiffness = 5000.0;  // N/m
inline constexpr double kPostFractureRatio = 0.25;
inline constexpr double kHardMinStiffness = 800.0;
inline constexpr double kSoftMaxStiffness = 300.0;
inline constexpr int kMaxPlateItems = 12;

enum class Compliance { Hard, Soft };

inline std::string_view to_string(Compliance c) { return c == Compliance::Hard ? "Hard" : "Soft"; }

/// Radial band of an item footprint with its own stiffness multiplier.
/// Radial fraction is measured in ellipse-normalised coordinates (1 = rim).
struct Subregion {
    double r_from = 0.0;
    double r_to = 1.0;
    double multiplier = 1.0;
};

struct MaterialProfile {
    double stiffness = 1000.0;       // N/m
    double fracture_force = 50.0;    // N
    Compliance compliance_class = Compliance::Hard;
    double pierce_depth = 0.005;     // m
    std::vector<Subregion> subregions{{0.0, 1.0, 1.0}};

    /// Multiplier of the band containing radial fraction r (r clamped to [0,1]).
    double multiplier_at(double r) const {
        r = std::clamp(r, 0.0, 1.0);
        for (const auto& s : subregions) {
            if (r >= s.r_from && (r < s.r_to || (s.r_to >= 1.0 && r <= 1.0))) return s.multiplier;
        }
        return subregions.empty() ? 1.0 : subregions.back().multiplier;
    }

    double max_multiplier() const {
        double m = 0.0;
        for (const auto& s : subregions) m = std::max(m, s.multiplier);
        return subregions.empty() ? 1.0 : m;
    }

    /// Throws ConfigError if an invariant is violated.
    void validate() const {
        if (!(stiffness > 0.0)) throw ConfigError("stiffness must be positive");
        if (!(fracture_force > 0.0)) throw ConfigError("fracture_force must be positive");
        if (compliance_class == Compliance::Hard && stiffness < kHardMinStiffness)
            throw ConfigError("hard material needs stiffness >= 800 N/m");
        if (compliance_class == Compliance::Soft && stiffness > kSoftMaxStiffness)
            throw ConfigError("soft material needs stiffness <= 300 N/m");
        if (subregions.empty()) throw ConfigError("material needs at least one subregion");
        double cursor = 0.0;
        for (const auto& s : subregions) {
            if (!(s.multiplier > 0.0)) throw ConfigError("subregion multiplier must be positive");
            if (std::abs(s.r_from - cursor) > 1e-12 || !(s.r_to > s.r_from))
                throw ConfigError("subregions must partition [0,1] in order");
            cursor = s.r_to;
        }
        if (std::abs(cursor - 1.0) > 1e-12) throw ConfigError("subregions must end at 1");
    }
};

struct Appearance {
    double base_hue = 0.0;  // [0,1)
    double saturation = 0.5;
    double value = 0.8;
    double shape_eccentricity = 0.0;  // 1 - minor/major
};

struct FoodItem {
    int id = 0;
    Vec2 center;
    double height = 0.02;
    double major_axis = 0.03;
    double minor_axis = 0.02;
    double axis_angle = 0.0;
    MaterialProfile material;
    Appearance appearance;
    std::string archetype;
    double nominal_height = 0.02;  // archetype-level height prior used in place of depth sensing

    double top_z(double plate_z = 0.0) const { return plate_z + height; }

    /// Ellipse-normalised radial coordinate of a plate point; > 1 outside the footprint.
    double radial_fraction(Vec2 p) const {
        const double c = std::cos(axis_angle);
        const double s = std::sin(axis_angle);
        const Vec2 d = p - center;
        const double u = d.x * c + d.y * s;
        const double v = -d.x * s + d.y * c;
        const double a = 0.5 * major_axis;
        const double b = 0.5 * minor_axis;
        return std::sqrt((u / a) * (u / a) + (v / b) * (v / b));
    }

    bool contains(Vec2 p) const { return radial_fraction(p) <= 1.0; }
};

struct PlateState {
    std::vector<FoodItem> items;
    double plate_radius = 0.12;
    double plate_z = 0.0;
    double plate_stiffness = kPlateStiffness;

    const FoodItem* find(int id) const {
        for (const auto& it : items)
            if (it.id == id) return &it;
        return nullptr;
    }

    /// Item whose footprint contains p, if any (items never overlap).
    const FoodItem* item_at(Vec2 p) const {
        for (const auto& it : items)
            if (it.contains(p)) return &it;
        return nullptr;
    }
};

struct ForkState {
    Vec3 position;
    double pitch = 0.0;  // beta
    double roll = 0.0;   // gamma
    double tine_engagement_depth = 0.0;
    int tines_inserted = 0;
};

enum class Primitive { Probe, VerticalSkewer, AngledSkewer, Scoop };

inline std::string_view to_string(Primitive p) {
    switch (p) {
        case Primitive::Probe: return "Probe";
        case Primitive::VerticalSkewer: return "VerticalSkewer";
        case Primitive::AngledSkewer: return "AngledSkewer";
        case Primitive::Scoop: return "Scoop";
    }
    return "?";
}

/// The fork action tuple (x, y, z, dz, gamma, dbeta) plus its primitive tag.
/// dz is the per-control-step descent (negative), dbeta the total pitch change.
struct Action {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double dz = 0.0;
    double gamma = 0.0;
    double dbeta = 0.0;
    Primitive primitive = Primitive::Probe;

    void validate() const {
        const bool skewer =
            primitive == Primitive::VerticalSkewer || primitive == Primitive::AngledSkewer;
        if (skewer && !(dz < 0.0)) throw InputError("skewer primitives must move downward");
        if (primitive == Primitive::Probe && !(dz < 0.0)) throw InputError("probe must move downward");
        if (dbeta < 0.0) throw InputError("dbeta must be non-negative");
        if (primitive == Primitive::Probe && dbeta != 0.0) throw InputError("probe has no tilt");
    }

    static Action probe(Vec3 top_estimate, double gamma) {
        return {top_estimate.x, top_estimate.y, top_estimate.z + kApproachHeight,
                -kControlDt * kProbeSpeed, gamma, 0.0, Primitive::Probe};
    }
    static Action vertical_skewer(Vec3 start, double gamma) {
        return {start.x, start.y, start.z, -kControlDt * kVerticalSpeed, gamma, 0.0,
                Primitive::VerticalSkewer};
    }
    static Action angled_skewer(Vec3 start, double gamma) {
        return {start.x, start.y, start.z, -kControlDt * kAngledSpeed, gamma, kAngledTilt,
                Primitive::AngledSkewer};
    }
    static Action scoop(Vec3 at, double gamma) {
        return {at.x, at.y, at.z, 0.0, gamma, kScoopPitch, Primitive::Scoop};
    }
};

struct HapticTrace {
    std::vector<double> samples;  // N
    double sample_period = kSubstepDt;
    int contact_onset_index = 0;
};

enum class FailureMode { None, Miss, DropAfterSkewer, Unstable, Damage, DetectionMiss, ExceededRetries };

inline std::string_view to_string(FailureMode m) {
    switch (m) {
        case FailureMode::None: return "None";
        case FailureMode::Miss: return "Miss";
        case FailureMode::DropAfterSkewer: return "DropAfterSkewer";
        case FailureMode::Unstable: return "Unstable";
        case FailureMode::Damage: return "Damage";
        case FailureMode::DetectionMiss: return "DetectionMiss";
        case FailureMode::ExceededRetries: return "ExceededRetries";
    }
    return "?";
}

struct TrialOutcome {
    int loss = 1;
    FailureMode failure_mode = FailureMode::Miss;
    double peak_force = 0.0;
    double insertion_depth = 0.0;
    int tines_inserted = 0;
};

}  // namespace skewersim::sim
