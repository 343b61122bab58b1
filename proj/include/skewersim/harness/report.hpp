#pragma once

#include <chrono>
#include <ostream>

#include "skewersim/harness/experiment.hpp"

namespace skewersim::harness {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr const char* kMetricsHeader = "plate,mode,seed,acquired,attempts,miss,drop,unstable,damage,detection,retries";

struct RunRow {
    std::string plate;
    std::string mode;
    std::uint64_t seed = 0;
    Metrics metrics;
};

struct ComparisonReport {
    std::vector<RunRow> rows;  // ordered by (spec, mode, seed)

    Metrics total(const std::string& mode, const std::string& plate = "") const {
        Metrics m;
        for (const auto& r : rows)
            if (r.mode == mode && (plate.empty() || r.plate == plate)) m += r.metrics;
        return m;
    }
    std::vector<std::string> modes() const {
        std::vector<std::string> out;
        for (const auto& r : rows)
            if (std::find(out.begin(), out.end(), r.mode) == out.end()) out.push_back(r.mode);
        return out;
    }
    std::vector<std::string> plates() const {
        std::vector<std::string> out;
        for (const auto& r : rows)
            if (std::find(out.begin(), out.end(), r.plate) == out.end()) out.push_back(r.plate);
        return out;
    }
};

/// Seed of the i-th plate for a spec; shared by every policy so runs are paired.
inline std::uint64_t plate_seed(std::uint64_t base, const sim::PlateSpec& spec, int i) {
    return derive_seed(base, fnv1a(spec.label), static_cast<std::uint64_t>(i));
}

inline ComparisonReport compare_methods(const std::vector<sim::PlateSpec>& specs, const sim::ArchetypeTable& table,
                                        const std::vector<AcquisitionPolicy>& policies, int n_seeds, std::uint64_t base_seed,
                                        TrialConfig cfg = {}, int threads = thread_count()) {
    if (n_seeds < 1) throw ConfigError("need at least one seed per spec");
    for (const auto& p : policies)
        if (!p.choose) throw CheckpointError("policy " + p.name + " has no model");
    struct Job {
        std::size_t spec, pol;
        int i;
    };
    std::vector<Job> jobs;
    for (std::size_t s = 0; s < specs.size(); ++s)
        for (std::size_t p = 0; p < policies.size(); ++p)
            for (int i = 0; i < n_seeds; ++i) jobs.push_back({s, p, i});
    ComparisonReport rep;
    rep.rows = parallel_map<RunRow>(jobs.size(), threads, [&](std::size_t k) {
        const auto& j = jobs[k];
        TrialConfig c = cfg;
        c.seed = plate_seed(base_seed, specs[j.spec], j.i);
        auto log = run_plate_experiment(specs[j.spec], table, policies[j.pol], c);
        return RunRow{specs[j.spec].label, policies[j.pol].name, c.seed, log.metrics};
    });
    return rep;
}

inline void write_metrics_csv(const std::vector<RunRow>& rows, std::ostream& out) {
    out << kMetricsHeader << '\n';
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.plate << ',' << r.mode << ',' << r.seed << ',' << m.items_acquired << ',' << m.total_attempts << ',' << m.miss << ','
            << m.drop << ',' << m.unstable << ',' << m.damage << ',' << m.detection << ',' << m.retries << '\n';
    }
}

/// Per (plate, mode) totals followed by pooled rows with plate "ALL".
inline void write_summary_csv(const ComparisonReport& rep, std::ostream& out) {
    out << "plate,mode,acquired,attempts,success_rate\n";
    auto row = [&](const std::string& plate, const std::string& mode, const Metrics& m) {
        out << plate << ',' << mode << ',' << m.items_acquired << ',' << m.total_attempts << ',' << policy::format_number(m.success_rate())
            << '\n';
    };
    for (const auto& p : rep.plates())
        for (const auto& m : rep.modes()) row(p, m, rep.total(m, p));
    for (const auto& m : rep.modes()) row("ALL", m, rep.total(m));
}

struct ConfusionMatrix {
    std::array<std::array<int, 2>, 2> counts{};  // [true label][predicted]

    int total() const { return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1]; }
    double accuracy() const { return total() ? static_cast<double>(counts[0][0] + counts[1][1]) / total() : 0.0; }
    double class_accuracy(int label) const {
        const auto& row = counts[static_cast<std::size_t>(label)];
        const int n = row[0] + row[1];
        return n ? static_cast<double>(row[static_cast<std::size_t>(label)]) / n : 0.0;
    }
    nlohmann::json to_json() const {
        return {{"labels", {"VerticalSkewer", "AngledSkewer"}},
                {"counts", counts},
                {"accuracy", accuracy()},
                {"vertical_accuracy", class_accuracy(policy::kVertical)},
                {"angled_accuracy", class_accuracy(policy::kAngled)}};
    }
};

inline ConfusionMatrix evaluate_confusion(const std::function<int(const policy::Example&)>& classify,
                                          const std::vector<policy::Example>& xs) {
    if (xs.empty()) throw ConfigError("evaluation set is empty");
    ConfusionMatrix cm;
    for (const auto& e : xs) ++cm.counts[static_cast<std::size_t>(e.label)][static_cast<std::size_t>(classify(e))];
    return cm;
}

inline ConfusionMatrix evaluate_confusion(policy::PolicyNet<float>& model, const std::vector<policy::Example>& xs) {
    return evaluate_confusion(
        [&](const policy::Example& e) {
            return policy::infer_primitive(model, e).primitive == sim::Primitive::VerticalSkewer ? policy::kVertical : policy::kAngled;
        },
        xs);
}

/// Run manifest: what ran, with which config and seed, and how long it took.
inline nlohmann::json make_manifest(const std::string& command, const nlohmann::json& config, std::uint64_t seed,
                                    double wall_seconds, const std::vector<std::string>& artifacts) {
    return {{"command", command},
            {"config_hash", hex64(fnv1a(config.dump()))},
            {"config", config},
            {"seed", seed},
            {"version", kVersion},
            {"compiler", __VERSION__},
            {"cxx_standard", static_cast<long>(__cplusplus)},
            {"wall_time_s", wall_seconds},
            {"artifacts", artifacts}};
}

}  // namespace skewersim::harness
