#pragma once

#include "skewersim/simworld/types.hpp"

namespace skewersim::sim {

struct OutcomeOptions {
    double baseline_slip = 0.05;
    bool slip_enabled = true;
};

/// 1 - k/300 clamped to [0,1]; 0 for anything at least as stiff as the soft ceiling.
inline double softness_score(const MaterialProfile& m) {
    return std::clamp(1.0 - m.stiffness / kSoftMaxStiffness, 0.0, 1.0);
}

inline double slip_probability(const FoodItem& item, Primitive primitive, const OutcomeOptions& opt = {}) {
    if (!opt.slip_enabled) return 0.0;
    if (primitive == Primitive::VerticalSkewer && item.material.compliance_class == Compliance::Soft)
        return sigmoid(4.0 * (softness_score(item.material) - 0.5));
    return opt.baseline_slip;
}

inline int tines_from_offset(double final_offset, double minor_axis) {
    if (final_offset <= 0.25 * minor_axis) return 4;
    if (final_offset <= 0.5 * minor_axis) return 2;
    return 0;
}

/// Classifies one skewer + scoop. Rules are checked in order: Miss, Damage,
/// DropAfterSkewer, Unstable. Exactly one uniform is drawn per call so paired
/// runs sharing an rng stream see the same slip draw whatever the primitive.
inline TrialOutcome resolve_outcome(const FoodItem& item, Primitive primitive, double insertion_depth,
                                    double peak_force, double final_offset, Rng& rng,
                                    const OutcomeOptions& opt = {}) {
    const double u = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    TrialOutcome o;
    o.peak_force = peak_force;
    o.insertion_depth = insertion_depth;
    o.tines_inserted = tines_from_offset(final_offset, item.minor_axis);
    o.loss = 1;
    if (insertion_depth < item.material.pierce_depth || o.tines_inserted < 2) {
        o.failure_mode = FailureMode::Miss;
    } else if (peak_force > item.material.fracture_force && item.material.compliance_class == Compliance::Soft) {
        o.failure_mode = FailureMode::Damage;
    } else if (u < slip_probability(item, primitive, opt)) {
        o.failure_mode = FailureMode::DropAfterSkewer;
    } else if (o.tines_inserted == 2) {
        o.failure_mode = FailureMode::Unstable;
    } else {
        o.failure_mode = FailureMode::None;
        o.loss = 0;
    }
    return o;
}

}  // namespace skewersim::sim
