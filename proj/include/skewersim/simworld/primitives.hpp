#pragma once

#include <optional>
#include <vector>

#include "skewersim/simworld/contact.hpp"

namespace skewersim::sim {

struct TrajectoryPoint {
    double t = 0.0;
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double force = 0.0;  // axial force along the fork
};

enum class Termination { Contact, PlateHeight, ForceLimit, Completed, StepLimit };

struct PrimitiveResult {
    std::vector<TrajectoryPoint> trajectory;
    std::optional<HapticTrace> trace;
    ForkState fork;
    Termination termination = Termination::Completed;
    double peak_force = 0.0;        // force carried by the material
    double peak_axial_force = 0.0;  // force along the tilted fork, what F_max guards
    double insertion_depth = 0.0;
    int target_id = -1;             // item under the tines, -1 for bare plate
    bool plate_contact = false;     // tines reached the plate during the recorded window
};

struct PrimitiveOptions {
    double sensor_noise = kSensorNoise;
    int max_control_steps = 400;
    int scoop_steps = 8;
};

namespace detail {

struct TipSim {
    const PlateState& plate;
    Vec2 xy;
    double gamma;
    PrimitiveResult& out;
    double t = 0.0;
    int substep = 0;

    double force_at(double z) const { return surface_force(plate, xy, z); }

    void record(double z, double beta, double axial) {
        out.trajectory.push_back({t, xy.x, xy.y, z, beta, gamma, axial});
    }

    /// Advance one 1 kHz substep; records a trajectory point at every control tick.
    void tick(double z, double beta, double axial) {
        t += kSubstepDt;
        ++substep;
        if (substep % kSubstepsPerControl == 0) record(z, beta, axial);
    }
};

}  // namespace detail

/// Runs one primitive from the pose in `action` at the 20 Hz controller rate,
/// sensing force at 1 kHz. The probe descends until contact and records the
/// first 26 ms of contact while still closing at probe speed, then holds.
/// Skewers descend until the plate or the axial force limit, tilting over
/// the first few millimetres of in-contact travel for the angled variant.
/// Scoop pivots in place to the commanded pitch.
inline PrimitiveResult execute_primitive(const PlateState& plate, const ForkState& fork, const Action& action,
                                         Rng& rng, const PrimitiveOptions& opt = {}) {
    action.validate();
    PrimitiveResult out;
    const Vec2 xy{action.x, action.y};
    detail::TipSim sim{plate, xy, action.gamma, out};
    double z = action.z;
    const double floor_z = plate.plate_z - kPlateClearance;
    if (z < floor_z) throw InvalidStartError("fork starts below the plate");
    const double start_force = sim.force_at(z);
    if (action.primitive == Primitive::Probe && start_force > 0.0)
        throw InvalidStartError("probe must start out of contact");
    if (start_force >= kForceLimit) throw InvalidStartError("fork starts at the force limit");

    const FoodItem* target = plate.item_at(xy);
    out.target_id = target ? target->id : -1;
    const int max_substeps = opt.max_control_steps * kSubstepsPerControl;

    auto finish = [&](double beta) {
        out.fork.position = {xy.x, xy.y, z};
        out.fork.pitch = beta;
        out.fork.roll = action.gamma;
        if (target) out.insertion_depth = std::clamp(target->top_z(plate.plate_z) - z, 0.0, target->height);
        out.fork.tine_engagement_depth = out.insertion_depth;
        out.fork.tines_inserted = fork.tines_inserted;
        if (out.trajectory.empty() || out.trajectory.back().t != sim.t)
            sim.record(z, beta, sim.force_at(z) / std::cos(beta));
    };

    sim.record(z, action.primitive == Primitive::Scoop ? fork.pitch : 0.0, start_force);

    switch (action.primitive) {
        case Primitive::Probe: {
            const double step = -action.dz / kControlDt * kSubstepDt;
            double f = start_force;
            while (f < kContactThreshold) {
                if (sim.substep >= max_substeps) {
                    out.termination = Termination::StepLimit;
                    finish(0.0);
                    return out;
                }
                z = std::max(z - step, floor_z);
                f = sim.force_at(z);
                sim.tick(z, 0.0, f);
            }
            HapticTrace trace;
            trace.contact_onset_index = 0;
            trace.samples.reserve(kTraceLength);
            bool holding = false;
            for (int i = 0; i < kTraceLength; ++i) {
                if (i > 0) {
                    if (!holding) z = std::max(z - step, floor_z);
                    f = sim.force_at(z);
                    sim.tick(z, 0.0, f);
                }
                if (z < plate.plate_z) out.plate_contact = true;
                if (f >= kForceLimit) holding = true;
                out.peak_force = std::max(out.peak_force, f);
                trace.samples.push_back(std::max(0.0, f + gaussian(rng, opt.sensor_noise)));
            }
            out.peak_axial_force = out.peak_force;
            out.trace = std::move(trace);
            out.termination = Termination::Contact;
            finish(0.0);
            return out;
        }
        case Primitive::VerticalSkewer:
        case Primitive::AngledSkewer: {
            const double step = -action.dz / kControlDt * kSubstepDt;
            double travel = 0.0;
            double beta = 0.0;
            out.peak_force = start_force;
            out.peak_axial_force = start_force;
            out.termination = Termination::StepLimit;
            while (sim.substep < max_substeps) {
                if (z <= plate.plate_z) {
                    out.termination = Termination::PlateHeight;
                    break;
                }
                const double nz = std::max(z - step, plate.plate_z);
                const double f = sim.force_at(nz);
                if (f > 0.0) travel += z - nz;
                z = nz;
                beta = action.dbeta * std::min(1.0, travel / kTiltRampTravel);
                const double axial = f / std::cos(beta);
                out.peak_force = std::max(out.peak_force, f);
                out.peak_axial_force = std::max(out.peak_axial_force, axial);
                sim.tick(z, beta, axial);
                if (axial >= kForceLimit) {
                    out.termination = Termination::ForceLimit;
                    break;
                }
            }
            finish(beta);
            return out;
        }
        case Primitive::Scoop: {
            const double from = fork.pitch;
            const double to = std::max(from, action.dbeta);
            const double f = sim.force_at(z);
            for (int s = 1; s <= opt.scoop_steps; ++s) {
                const double beta = from + (to - from) * s / opt.scoop_steps;
                for (int k = 0; k < kSubstepsPerControl; ++k) sim.tick(z, beta, f);
            }
            out.peak_force = f;
            out.termination = Termination::Completed;
            finish(to);
            out.trajectory.back().force = f;
            return out;
        }
    }
    return out;
}

}  // namespace skewersim::sim
