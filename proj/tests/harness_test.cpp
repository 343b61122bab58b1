#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "skewersim/harness.hpp"
#include "skewersim/harness/cli.hpp"

using namespace skewersim;
using namespace skewersim::harness;

namespace {

const sim::ArchetypeTable& table() {
    static const auto t = sim::default_archetype_table();
    return t;
}

sim::PlateSpec single(const std::string& name, int n = 1) { return {name, {{name, n}}}; }

struct Scene {
    sim::PlateState plate;
    perception::OverheadImage overhead;
    perception::Detection target;
};

Scene scene(const sim::PlateSpec& spec, std::uint64_t seed) {
    Scene s{sim::spawn_plate(spec, table(), seed), {}, {}};
    s.overhead = perception::render_overhead(s.plate, seed);
    const auto& it = s.plate.items.front();
    s.target = {perception::true_box(it, s.overhead), false, it.id};
    return s;
}

// Multimodal model trained on the unaugmented base set; fast and accurate enough for noise-free trials.
const policy::PolicyNet<float>& quick_model() {
    static const auto m = [] {
        const auto d = policy::generate_dataset(table(), 300, 11);
        return policy::train_policy(d.train, policy::PolicyMode::Multimodal, {}, 11).model;
    }();
    return m;
}

std::string read_file(const std::string& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

int cli(std::vector<std::string> args, std::string* out_text = nullptr) {
    args.insert(args.begin(), "skewersim");
    std::vector<char*> argv;
    for (auto& a : args) argv.push_back(a.data());
    std::ostringstream out, err;
    const int rc = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    if (out_text) *out_text = out.str() + err.str();
    return rc;
}

std::string temp_dir(const std::string& name) {
    const auto p = std::filesystem::path(::testing::TempDir()) / ("skewersim_" + name);
    std::filesystem::remove_all(p);
    return p.string();
}

std::string write_config(const std::string& name, const std::string& text) {
    const auto p = (std::filesystem::path(::testing::TempDir()) / name).string();
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST(Attempt, HardItemNoiseFreeMultimodalSkewersVertically) {
    auto pol = learned_policy(quick_model());
    const auto cfg = TrialConfig::noise_free();
    for (const char* name : {"raw_carrot", "apple", "cheddar"})
        for (std::uint64_t s = 0; s < 5; ++s) {
            const auto sc = scene(single(name), s);
            const auto rec = run_acquisition_attempt(sc.plate, sc.overhead, sc.target, pol, cfg, s);
            EXPECT_EQ(rec.primitive, sim::Primitive::VerticalSkewer) << name << " seed " << s;
            EXPECT_EQ(rec.outcome.loss, 0) << name << " seed " << s << " " << sim::to_string(rec.outcome.failure_mode);
        }
}

TEST(Attempt, SpuriousTargetIsDetectionMiss) {
    auto sc = scene(single("apple"), 3);
    const auto& it = sc.plate.items.front();
    const Vec2 bare = it.center.norm() > 0.01 ? Vec2{-it.center.x, -it.center.y} : Vec2{0.08, 0.0};
    const Vec2 px = sc.overhead.camera().to_px(bare);
    const perception::Detection fp{{px.x, px.y, 10, 10}, true, -1};
    auto pol = oracle_policy();
    const auto rec = run_acquisition_attempt(sc.plate, sc.overhead, fp, pol, TrialConfig{}, 1);
    EXPECT_EQ(rec.outcome.failure_mode, sim::FailureMode::DetectionMiss);
    EXPECT_EQ(rec.outcome.loss, 1);
    EXPECT_EQ(sc.plate.items.size(), 1u);
}

TEST(Attempt, ForcedVerticalOnThinSoftItemDropsMoreOften) {
    auto vertical = constant_policy(sim::Primitive::VerticalSkewer);
    auto angled = constant_policy(sim::Primitive::AngledSkewer);
    int drop_v = 0, drop_a = 0;
    const int n = 500;
    for (int s = 0; s < n; ++s) {
        const auto sc = scene(single("banana"), static_cast<std::uint64_t>(s));
        const auto seed = derive_seed(99, static_cast<std::uint64_t>(s));
        drop_v += run_acquisition_attempt(sc.plate, sc.overhead, sc.target, vertical, TrialConfig{}, seed).outcome.failure_mode ==
                  sim::FailureMode::DropAfterSkewer;
        drop_a += run_acquisition_attempt(sc.plate, sc.overhead, sc.target, angled, TrialConfig{}, seed).outcome.failure_mode ==
                  sim::FailureMode::DropAfterSkewer;
    }
    // binomial two-proportion z statistic
    const double pv = static_cast<double>(drop_v) / n, pa = static_cast<double>(drop_a) / n, p = (pv + pa) / 2;
    const double z = (pv - pa) / std::sqrt(2 * p * (1 - p) / n);
    EXPECT_GT(z, 5.0) << drop_v << " vs " << drop_a;
}

TEST(PlateExperiment, EmptyPlate) {
    const auto log = run_plate_experiment({"empty", {}}, table(), oracle_policy(), TrialConfig{});
    EXPECT_EQ(log.metrics.items_acquired, 0);
    EXPECT_EQ(log.metrics.total_attempts, 0);
}

TEST(PlateExperiment, OracleNoiseFreeClearsTenItems) {
    for (const auto& spec : default_plate_specs())
        for (std::uint64_t s = 0; s < 3; ++s) {
            const auto log = run_plate_experiment(spec, table(), oracle_policy(), TrialConfig::noise_free(s));
            EXPECT_EQ(log.metrics.items_acquired, 10) << spec.label << " seed " << s;
            EXPECT_EQ(log.metrics.total_attempts, 10) << spec.label << " seed " << s;
        }
}

TEST(PlateExperiment, AlwaysFailingItemsAreRetriedThenAbandoned) {
    auto angled = constant_policy(sim::Primitive::AngledSkewer);
    const auto log = run_plate_experiment({"carrots", {{"raw_carrot", 3}}}, table(), angled, TrialConfig::noise_free(5));
    EXPECT_EQ(log.metrics.items_acquired, 0);
    EXPECT_EQ(log.metrics.total_attempts, 9);
    EXPECT_EQ(log.metrics.retries, 3);
    EXPECT_EQ(log.metrics.miss, 6);
    for (const auto& [id, n] : log.failed_attempts) EXPECT_EQ(n, 3);
}

TEST(PlateExperiment, AccountingInvariantsUnderNoise) {
    auto vertical = constant_policy(sim::Primitive::VerticalSkewer);
    for (const auto& spec : default_plate_specs())
        for (std::uint64_t s = 0; s < 4; ++s) {
            TrialConfig cfg;
            cfg.seed = s;
            const auto log = run_plate_experiment(spec, table(), vertical, cfg);
            const auto& m = log.metrics;
            EXPECT_TRUE(m.consistent());
            EXPECT_EQ(m.items_acquired + m.failures(), m.total_attempts);
            std::map<int, int> fails, wins;
            for (const auto& a : log.attempts) {
                if (a.item_id < 0) continue;
                (a.outcome.loss == 0 ? wins : fails)[a.item_id]++;
            }
            for (const auto& [id, n] : fails) EXPECT_LE(n, cfg.max_retries);
            for (const auto& [id, n] : wins) EXPECT_EQ(n, 1);
            EXPECT_GE(m.total_attempts, log.initial_items - log.undetected_items);
        }
}

TEST(PlateExperiment, MaxRetriesMustBePositive) {
    TrialConfig cfg;
    cfg.max_retries = 0;
    EXPECT_THROW(run_plate_experiment(single("apple"), table(), oracle_policy(), cfg), ConfigError);
}

TEST(CompareMethods, SingleRunEqualsPlateExperiment) {
    const auto spec = default_plate_specs()[2];
    const auto rep = compare_methods({spec}, table(), {oracle_policy()}, 1, 17, TrialConfig{}, 1);
    ASSERT_EQ(rep.rows.size(), 1u);
    TrialConfig cfg;
    cfg.seed = plate_seed(17, spec, 0);
    EXPECT_EQ(rep.rows[0].metrics, run_plate_experiment(spec, table(), oracle_policy(), cfg).metrics);
    EXPECT_EQ(rep.rows[0].seed, cfg.seed);
}

TEST(CompareMethods, DeterministicAndThreadIndependent) {
    const auto specs = default_plate_specs();
    const std::vector<AcquisitionPolicy> pols{oracle_policy(), learned_policy(quick_model()),
                                              constant_policy(sim::Primitive::VerticalSkewer)};
    auto csv = [&](int threads) {
        std::ostringstream out;
        write_metrics_csv(compare_methods(specs, table(), pols, 2, 42, TrialConfig{}, threads).rows, out);
        return out.str();
    };
    const auto a = csv(1);
    EXPECT_EQ(a, csv(1));
    EXPECT_EQ(a, csv(3));
    EXPECT_EQ(a.rfind(std::string(kMetricsHeader) + "\n", 0), 0u);
    EXPECT_EQ(std::count(a.begin(), a.end(), '\n'), 1 + 6 * 3 * 2);
}

TEST(CompareMethods, PolicyWithoutModelRejected) {
    AcquisitionPolicy empty{"Multimodal", true, {}};
    EXPECT_THROW(compare_methods(default_plate_specs(), table(), {empty}, 1, 1), CheckpointError);
}

TEST(CompareMethods, SummaryPoolsRows) {
    const auto rep = compare_methods({default_plate_specs()[0], default_plate_specs()[3]}, table(), {oracle_policy()}, 2, 5, {}, 1);
    Metrics pooled;
    for (const auto& r : rep.rows) pooled += r.metrics;
    EXPECT_EQ(rep.total("Oracle"), pooled);
    std::ostringstream out;
    write_summary_csv(rep, out);
    const auto s = out.str();
    EXPECT_NE(s.find("ALL,Oracle," + std::to_string(pooled.items_acquired) + "," + std::to_string(pooled.total_attempts)), std::string::npos);
}

TEST(Confusion, PerfectStubIsDiagonal) {
    const auto d = policy::generate_dataset(table(), 60, 3, 0);
    const auto cm = evaluate_confusion([](const policy::Example& e) { return e.label; }, d.train);
    EXPECT_EQ(cm.counts[0][1], 0);
    EXPECT_EQ(cm.counts[1][0], 0);
    EXPECT_EQ(cm.total(), 60);
    EXPECT_DOUBLE_EQ(cm.accuracy(), 1.0);
}

TEST(Confusion, ConstantAngledOnBalancedSet) {
    const auto d = policy::generate_dataset(table(), 60, 3, 0);
    int angled = 0;
    for (const auto& e : d.train) angled += e.label == policy::kAngled;
    ASSERT_EQ(angled, 30);
    const auto cm = evaluate_confusion([](const policy::Example&) { return policy::kAngled; }, d.train);
    EXPECT_DOUBLE_EQ(cm.accuracy(), 0.5);
    EXPECT_DOUBLE_EQ(cm.class_accuracy(policy::kVertical), 0.0);
    EXPECT_DOUBLE_EQ(cm.class_accuracy(policy::kAngled), 1.0);
}

TEST(Confusion, EmptySetRejected) {
    EXPECT_THROW(evaluate_confusion([](const policy::Example&) { return 0; }, {}), ConfigError);
}

TEST(ParallelMap, OrderedResultsAndErrorPropagation) {
    const auto v = parallel_map<int>(50, 4, [](std::size_t i) { return static_cast<int>(i * i); });
    for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v[i], static_cast<int>(i * i));
    EXPECT_THROW(parallel_map<int>(10, 3,
                                   [](std::size_t i) {
                                       if (i == 7) throw InputError("boom");
                                       return 0;
                                   }),
                 InputError);
}

TEST(ParallelMap, ThreadCountFromEnvironment) {
    ::setenv("SKEWERSIM_THREADS", "3", 1);
    EXPECT_EQ(thread_count(), 3);
    ::setenv("SKEWERSIM_THREADS", "zero", 1);
    EXPECT_THROW(thread_count(), ConfigError);
    ::unsetenv("SKEWERSIM_THREADS");
    EXPECT_EQ(thread_count(), 1);
}

TEST(Cli, UnknownSubcommandOrFlagIsUsageError) {
    std::string text;
    EXPECT_EQ(cli({"bogus"}, &text), 1);
    EXPECT_EQ(cli({"run-plates", "--frobnicate"}, &text), 1);
    EXPECT_EQ(cli({}, &text), 1);
}

TEST(Cli, MissingConfigIsValidationError) {
    std::string text;
    EXPECT_EQ(cli({"run-plates", "--config", "missing.json", "--out", temp_dir("missing")}, &text), 1);
    EXPECT_NE(text.find("not found"), std::string::npos);
}

TEST(Cli, LearnedModeWithoutCheckpointIsValidationError) {
    const auto cfg = write_config("mm.json", R"({"mode": "Multimodal"})");
    EXPECT_EQ(cli({"run-plates", "--config", cfg, "--out", temp_dir("nomodel")}), 1);
}

TEST(Cli, GradcheckPassesAndWritesManifest) {
    const auto out = temp_dir("gradcheck");
    std::string text;
    EXPECT_EQ(cli({"gradcheck", "--seed", "1", "--out", out}, &text), 0);
    EXPECT_NE(text.find("max relative error"), std::string::npos);
    const auto man = nlohmann::json::parse(read_file(out + "/manifest.json"));
    EXPECT_EQ(man.at("seed").get<int>(), 1);
    EXPECT_EQ(man.at("command"), "gradcheck");
    EXPECT_EQ(man.at("config_hash").get<std::string>().size(), 16u);
    EXPECT_TRUE(man.contains("wall_time_s"));
    EXPECT_TRUE(man.contains("version"));
    const auto g = nlohmann::json::parse(read_file(out + "/gradcheck.json"));
    EXPECT_LT(g.at("max_rel_error").get<double>(), 1e-4);
}

TEST(Cli, PipelineArtifactsAreDeterministic) {
    const auto cfg = write_config("small.json", R"({"n_base": 32, "n_test": 16, "training": {"epochs": 2},
        "augmentation": {"copies": 2}, "n_seeds": 1, "plates": [{"label": "p", "archetypes": [{"name": "apple", "count": 2}, {"name": "kiwi", "count": 2}]}],
        "modes": ["Oracle", "Multimodal", "OpenLoop"], "fractions": [0.5, 1.0], "seeds": [1, 2]})");
    auto run = [&](const std::string& tag) {
        const auto out = temp_dir("pipe_" + tag);
        EXPECT_EQ(cli({"gen-data", "--config", cfg, "--seed", "4", "--out", out + "/data"}), 0);
        const auto cfg2 = write_config("small_" + tag + ".json",
                                       nlohmann::json{{"data", out + "/data"}, {"training", {{"epochs", 2}}}, {"augmentation", {{"copies", 2}}},
                                                      {"modes", {"Multimodal", "HapticOnly"}}}
                                           .dump());
        EXPECT_EQ(cli({"train", "--config", cfg2, "--seed", "4", "--out", out + "/train"}), 0);
        const auto cfg3 = write_config("eval_" + tag + ".json",
                                       nlohmann::json{{"data", out + "/data"}, {"model", out + "/train/model_Multimodal.json"}}.dump());
        EXPECT_EQ(cli({"eval", "--config", cfg3, "--out", out + "/eval"}), 0);
        EXPECT_EQ(cli({"export-embeddings", "--config", cfg3, "--out", out + "/emb"}), 0);
        const auto cfg4 = write_config("run_" + tag + ".json",
                                       nlohmann::json{{"mode", "Multimodal"}, {"models", {{"Multimodal", out + "/train/model_Multimodal.json"}}},
                                                      {"plates", {{{"label", "p"}, {"archetypes", {{{"name", "apple"}, {"count", 2}}}}}}}}
                                           .dump());
        EXPECT_EQ(cli({"run-plates", "--config", cfg4, "--seed", "4", "--out", out + "/plates"}), 0);
        EXPECT_EQ(cli({"compare", "--config", cfg, "--seed", "4", "--out", out + "/compare"}), 0);
        EXPECT_EQ(cli({"sweep", "--config", cfg, "--seed", "4", "--out", out + "/sweep"}), 0);
        return out;
    };
    const auto a = run("a"), b = run("b");
    for (const char* f : {"data/train.jsonl", "data/test.jsonl", "train/model_Multimodal.json", "train/model_HapticOnly.json",
                          "train/training_curve.csv", "eval/confusion.json", "emb/embeddings.csv", "plates/metrics.csv",
                          "compare/comparison.csv", "compare/summary.csv", "sweep/sweep.csv"}) {
        const auto fa = read_file(a + "/" + f);
        EXPECT_FALSE(fa.empty()) << f;
        EXPECT_EQ(fa, read_file(b + "/" + f)) << f;
    }
    const auto emb = read_file(a + "/emb/embeddings.csv");
    EXPECT_EQ(std::count(emb.begin(), emb.end(), '\n'), 17);
    const auto sweep = read_file(a + "/sweep/sweep.csv");
    EXPECT_EQ(std::count(sweep.begin(), sweep.end(), '\n'), 5);
}

TEST(Cli, NonMultimodalEmbeddingExportIsModeError) {
    const auto out = temp_dir("emb_mode");
    const auto cfg = write_config("hap.json", R"({"n_base": 16, "n_test": 4, "training": {"epochs": 1}, "augmentation": {"copies": 1}, "modes": ["HapticOnly"]})");
    ASSERT_EQ(cli({"train", "--config", cfg, "--out", out}), 0);
    const auto cfg2 = write_config("hap_emb.json", nlohmann::json{{"n_base", 16}, {"n_test", 4}, {"model", out + "/model_HapticOnly.json"}}.dump());
    EXPECT_EQ(cli({"export-embeddings", "--config", cfg2, "--out", out + "/emb"}), 1);
}
