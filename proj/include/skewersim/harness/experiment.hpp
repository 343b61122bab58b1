#pragma once

#include <atomic>
#include <functional>
#include <mutex>
#include <set>
#include <thread>

#include "skewersim/perception.hpp"
#include "skewersim/policy.hpp"
#include "skewersim/simworld.hpp"

namespace skewersim::harness {

using perception::Image;

/// What a policy may look at when choosing a skewer.
struct Observation {
    const Image* local_image = nullptr;         // post-contact view, null when the probe is skipped
    const std::vector<double>* trace = nullptr;  // null when the probe is skipped
    const Image* overhead_crop = nullptr;       // pre-contact patch around the keypoint
    const sim::FoodItem* item = nullptr;        // hidden ground truth, for the oracle and test stubs
};

/// A skewer chooser. `probe` false skips the probe entirely (open-loop).
struct AcquisitionPolicy {
    std::string name;
    bool probe = true;
    std::function<sim::Primitive(const Observation&)> choose;
};

/// Reads the hidden compliance class.
inline AcquisitionPolicy oracle_policy() {
    return {"Oracle", true, [](const Observation& o) {
                return o.item ? policy::label_primitive(policy::label_for(o.item->material.compliance_class))
                              : sim::Primitive::AngledSkewer;
            }};
}

inline AcquisitionPolicy constant_policy(sim::Primitive p, bool probe = true) {
    return {std::string(sim::to_string(p)), probe, [p](const Observation&) { return p; }};
}

/// Wraps a trained model. Each copy of the returned policy owns its own model
/// copy, so copies may run on different threads.
inline AcquisitionPolicy learned_policy(const policy::PolicyNet<float>& model) {
    const auto mode = model.mode();
    return {std::string(policy::to_string(mode)), mode != policy::PolicyMode::OpenLoop,
            [net = model, mode](const Observation& o) mutable {
                const Image* img = mode == policy::PolicyMode::OpenLoop ? o.overhead_crop : o.local_image;
                return policy::infer_primitive(net, img, o.trace).primitive;
            }};
}

struct TrialConfig {
    int max_retries = 3;
    perception::ServoMode servo_mode = perception::ServoMode::Oracle;
    perception::ServoNet<float>* servo_model = nullptr;
    bool detection_noise = true;
    bool servo_noise = true;
    bool sensor_noise = true;
    bool slip = true;
    std::uint64_t seed = 0;

    static TrialConfig noise_free(std::uint64_t seed = 0) {
        TrialConfig c;
        c.detection_noise = c.servo_noise = c.sensor_noise = c.slip = false;
        c.seed = seed;
        return c;
    }
    perception::DetectionNoise detection() const {
        return detection_noise ? perception::DetectionNoise{} : perception::DetectionNoise::none();
    }
    void validate() const {
        if (max_retries < 1) throw ConfigError("max_retries must be >= 1");
        if (servo_mode == perception::ServoMode::Learned && !servo_model) throw ModeError("learned servo needs a model");
    }
};

struct AttemptRecord {
    int item_id = -1;  // -1 for a spurious target
    sim::Primitive primitive = sim::Primitive::Probe;
    sim::TrialOutcome outcome;
    Vec2 fork_xy;
};

/// One closed-loop attempt on the item behind `target`: pose, servo, probe,
/// choose, skewer, scoop, resolve. Every stage draws from its own stream
/// derived from `attempt_seed`, so policies that choose alike see identical draws.
inline AttemptRecord run_acquisition_attempt(const sim::PlateState& plate, const perception::OverheadImage& overhead,
                                             const perception::Detection& target, AcquisitionPolicy& pol,
                                             const TrialConfig& cfg, std::uint64_t attempt_seed) {
    AttemptRecord rec;
    rec.item_id = target.item_id;
    auto detection_miss = [&] {
        rec.outcome = {};
        rec.outcome.failure_mode = sim::FailureMode::DetectionMiss;
        return rec;
    };
    perception::PoseEstimate pose;
    try {
        pose = perception::estimate_pose(overhead, target.box, plate);
    } catch (const NoItemError&) {
        return detection_miss();
    }
    perception::ServoOptions sopt;
    sopt.mode = cfg.servo_mode;
    sopt.model = cfg.servo_model;
    sopt.sigma_px = cfg.servo_noise ? sopt.sigma_px : 0.0;
    Rng servo_rng(derive_seed(attempt_seed, 1));
    perception::ServoResult servo;
    try {
        servo = perception::servo_loop(plate, {}, pose, sopt, servo_rng);
    } catch (const TargetLostError&) {
        return detection_miss();
    }
    const Vec2 xy{servo.fork.position.x, servo.fork.position.y};
    rec.fork_xy = xy;
    const sim::FoodItem* item = plate.find(target.item_id);

    sim::PrimitiveOptions popt;
    if (!cfg.sensor_noise) popt.sensor_noise = 0.0;
    const Image crop = policy::crop_overhead(overhead, overhead.camera().to_px({pose.keypoint.x, pose.keypoint.y}));
    Observation obs;
    obs.overhead_crop = &crop;
    obs.item = item;
    Image local;
    sim::PrimitiveResult probe;
    if (pol.probe) {
        Rng probe_rng(derive_seed(attempt_seed, 2));
        probe = sim::execute_primitive(plate, servo.fork, sim::Action::probe({xy.x, xy.y, pose.keypoint.z}, pose.gamma),
                                       probe_rng, popt);
        local = perception::render_local(plate, xy, derive_seed(attempt_seed, 3)).pixels;
        obs.local_image = &local;
        obs.trace = &probe.trace->samples;
    }
    rec.primitive = pol.choose(obs);

    const Vec3 start{xy.x, xy.y, pose.keypoint.z + sim::kApproachHeight};
    const auto action = rec.primitive == sim::Primitive::VerticalSkewer ? sim::Action::vertical_skewer(start, pose.gamma)
                                                                        : sim::Action::angled_skewer(start, pose.gamma);
    Rng skewer_rng(derive_seed(attempt_seed, 4));
    const auto skewer = sim::execute_primitive(plate, servo.fork, action, skewer_rng, popt);
    if (skewer.termination != sim::Termination::ForceLimit)
        sim::execute_primitive(plate, skewer.fork, sim::Action::scoop(skewer.fork.position, pose.gamma), skewer_rng, popt);

    if (!item) return detection_miss();
    Rng outcome_rng(derive_seed(attempt_seed, 5));
    sim::OutcomeOptions oopt;
    oopt.slip_enabled = cfg.slip;
    rec.outcome = sim::resolve_outcome(*item, rec.primitive, skewer.insertion_depth, skewer.peak_force, (xy - item->center).norm(),
                                       outcome_rng, oopt);
    return rec;
}

struct Metrics {
    int items_acquired = 0;
    int total_attempts = 0;
    int miss = 0, drop = 0, unstable = 0, damage = 0, detection = 0, retries = 0;

    double success_rate() const { return total_attempts ? static_cast<double>(items_acquired) / total_attempts : 0.0; }
    int failures() const { return miss + drop + unstable + damage + detection + retries; }
    bool consistent() const { return total_attempts >= items_acquired && failures() == total_attempts - items_acquired; }

    void count(sim::FailureMode m) {
        ++total_attempts;
        switch (m) {
            case sim::FailureMode::None: ++items_acquired; break;
            case sim::FailureMode::Miss: ++miss; break;
            case sim::FailureMode::DropAfterSkewer: ++drop; break;
            case sim::FailureMode::Unstable: ++unstable; break;
            case sim::FailureMode::Damage: ++damage; break;
            case sim::FailureMode::DetectionMiss: ++detection; break;
            case sim::FailureMode::ExceededRetries: ++retries; break;
        }
    }
    Metrics& operator+=(const Metrics& o) {
        items_acquired += o.items_acquired;
        total_attempts += o.total_attempts;
        miss += o.miss, drop += o.drop, unstable += o.unstable, damage += o.damage, detection += o.detection, retries += o.retries;
        return *this;
    }
    bool operator==(const Metrics&) const = default;
};

struct ExperimentLog {
    Metrics metrics;
    std::vector<AttemptRecord> attempts;
    int initial_items = 0;
    int undetected_items = 0;  // left on the plate because no detection ever fired
    std::map<int, int> failed_attempts;  // per item id
};

/// Clears one plate: detect, take the detection nearest the fork, attempt,
/// remove acquired items. An item failing max_retries times is abandoned and
/// its last failure is booked as ExceededRetries. Ends when nothing attemptable
/// is detected; a round whose only detections are spurious ends it after one attempt.
inline ExperimentLog run_plate_experiment(const sim::PlateSpec& spec, const sim::ArchetypeTable& table, AcquisitionPolicy pol,
                                          const TrialConfig& cfg) {
    cfg.validate();
    ExperimentLog log;
    auto plate = sim::spawn_plate(spec, table, derive_seed(cfg.seed, fnv1a("plate")));
    log.initial_items = static_cast<int>(plate.items.size());
    std::set<int> abandoned;
    const auto noise = cfg.detection();
    Vec2 fork{0.0, 0.0};
    const int max_rounds = 4 * (cfg.max_retries + 1) * std::max(1, log.initial_items) + 4;
    for (int round = 0; round < max_rounds && !plate.items.empty(); ++round) {
        const auto overhead = perception::render_overhead(plate, derive_seed(cfg.seed, fnv1a("render"), static_cast<std::uint64_t>(round)));
        std::vector<perception::Detection> dets;
        for (const auto& it : plate.items) {
            if (abandoned.count(it.id)) continue;
            Rng det_rng(derive_seed(cfg.seed, fnv1a("detect"), static_cast<std::uint64_t>(it.id)));
            if (auto d = perception::detect_item(it, overhead, det_rng, noise)) dets.push_back(*d);
        }
        Rng fp_rng(derive_seed(cfg.seed, fnv1a("spurious"), static_cast<std::uint64_t>(round)));
        if (auto d = perception::spurious_detection(plate, overhead, fp_rng, noise)) dets.push_back(*d);
        if (dets.empty()) break;

        const perception::Camera cam = overhead.camera();
        const auto nearest = std::min_element(dets.begin(), dets.end(), [&](const auto& a, const auto& b) {
            return (cam.to_world({a.box.cx, a.box.cy}) - fork).norm() < (cam.to_world({b.box.cx, b.box.cy}) - fork).norm();
        });
        const bool only_spurious = std::all_of(dets.begin(), dets.end(), [](const auto& d) { return d.is_false_positive; });
        const auto& target = *nearest;
        const std::uint64_t attempt_seed =
            target.is_false_positive
                ? derive_seed(cfg.seed, fnv1a("spurious-attempt"), static_cast<std::uint64_t>(round))
                : derive_seed(cfg.seed, fnv1a("attempt"), static_cast<std::uint64_t>(target.item_id),
                              static_cast<std::uint64_t>(log.failed_attempts[target.item_id]));
        auto rec = run_acquisition_attempt(plate, overhead, target, pol, cfg, attempt_seed);
        fork = target.is_false_positive ? fork : rec.fork_xy;
        if (rec.outcome.failure_mode == sim::FailureMode::None) {
            plate = sim::remove_item(plate, target.item_id);
        } else if (!target.is_false_positive && ++log.failed_attempts[target.item_id] >= cfg.max_retries) {
            rec.outcome.failure_mode = sim::FailureMode::ExceededRetries;
            abandoned.insert(target.item_id);
        }
        log.metrics.count(rec.outcome.failure_mode);
        log.attempts.push_back(rec);
        if (only_spurious) break;
    }
    for (const auto& it : plate.items)
        if (!abandoned.count(it.id)) ++log.undetected_items;
    return log;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers; results land by index.
template <typename R, typename F>
std::vector<R> parallel_map(std::size_t n, int threads, F fn) {
    std::vector<R> out(n);
    threads = std::max(1, std::min<int>(threads, static_cast<int>(n)));
    if (threads == 1) {
        for (std::size_t i = 0; i < n; ++i) out[i] = fn(i);
        return out;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t)
        pool.emplace_back([&] {
            for (std::size_t i; (i = next++) < n;) {
                try {
                    out[i] = fn(i);
                } catch (...) {
                    std::lock_guard lk(err_mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& th : pool) th.join();
    if (err) std::rethrow_exception(err);
    return out;
}

/// Worker count from SKEWERSIM_THREADS, default 1.
inline int thread_count() {
    const char* v = std::getenv("SKEWERSIM_THREADS");
    if (!v || !*v) return 1;
    try {
        return std::max(1, std::stoi(v));
    } catch (const std::exception&) {
        throw ConfigError(std::string("SKEWERSIM_THREADS is not a number: ") + v);
    }
}

}  // namespace skewersim::harness
