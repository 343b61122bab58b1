#pragma once

#include "skewersim/simworld/types.hpp"

namespace skewersim::sim {

/// Piecewise-linear elastic law with a post-fracture plateau.
///
/// Below the fracture point F = k_local * penetration. Once k_local * penetration
/// exceeds the local fracture force the item has broken and resists with
/// 0.25 * fracture. Past the item height the fork has reached the plate and the
/// plate spring adds on top of the fully compressed item. Fracture scales with
/// the subregion multiplier, so every band fractures at the same depth.
inline double contact_force(const FoodItem& item, Vec2 contact_point, double penetration,
                            double plate_stiffness = kPlateStiffness) {
    if (penetration < 0.0) throw InputError("penetration must be non-negative");
    if (penetration == 0.0) return 0.0;
    const double r = item.radial_fraction(contact_point);
    if (r > 1.0) return 0.0;
    const double mult = item.material.multiplier_at(r);
    const double k = item.material.stiffness * mult;
    const double fracture = item.material.fracture_force * mult;
    const double compressed = std::min(penetration, item.height);
    double f = k * compressed;
    if (f > fracture) f = kPostFractureRatio * fracture;
    if (penetration > item.height) f += plate_stiffness * (penetration - item.height);
    return f;
}

/// Force on a vertical fork tip at (p, tip_z): the item under p if any,
/// otherwise the bare plate.
inline double surface_force(const PlateState& plate, Vec2 p, double tip_z) {
    if (const FoodItem* item = plate.item_at(p)) {
        const double pen = std::max(0.0, item->top_z(plate.plate_z) - tip_z);
        return contact_force(*item, p, pen, plate.plate_stiffness);
    }
    return plate.plate_stiffness * std::max(0.0, plate.plate_z - tip_z);
}

}  // namespace skewersim::sim
