#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "skewersim/harness/plates.hpp"
#include "skewersim/harness/report.hpp"

namespace skewersim::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace cli_detail {

struct Context {
    std::string command;
    json config = json::object();
    std::uint64_t seed = 0;
    fs::path out;
    std::ostream* log = &std::cout;
    std::vector<std::string> artifacts;

    fs::path artifact(const std::string& name) {
        artifacts.push_back(name);
        return out / name;
    }
};

inline json load_config(const std::string& path) {
    if (path.empty()) return json::object();
    std::ifstream in(path);
    if (!in) throw NotFoundError("config file not found: " + path);
    try {
        auto j = json::parse(in);
        if (!j.is_object()) throw ConfigError(path + ": config must be a JSON object");
        return j;
    } catch (const json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline void write_text(const fs::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    if (!out) throw Error("cannot write " + p.string());
    out << s;
}

inline sim::ArchetypeTable table_of(const json& cfg) {
    return cfg.contains("archetypes") ? sim::load_archetype_table(cfg["archetypes"].get<std::string>()) : sim::default_archetype_table();
}

inline policy::AugmentationConfig augmentation_of(const json& cfg) {
    policy::AugmentationConfig a;
    if (!cfg.contains("augmentation")) return a;
    const auto& j = cfg["augmentation"];
    a.flip_prob = j.value("flip_prob", a.flip_prob);
    a.rotation_deg = j.value("rotation_deg", a.rotation_deg);
    a.translate_px = j.value("translate_px", a.translate_px);
    a.hue_sigma = j.value("hue_sigma", a.hue_sigma);
    a.time_scale_lo = j.value("time_scale_lo", a.time_scale_lo);
    a.time_scale_hi = j.value("time_scale_hi", a.time_scale_hi);
    a.shift_samples = j.value("shift_samples", a.shift_samples);
    a.copies = j.value("copies", a.copies);
    a.validate();
    return a;
}

inline policy::PolicyTrainConfig training_of(const json& cfg) {
    return policy::PolicyTrainConfig::from_json(cfg.value("training", json::object()));
}

/// Base and test examples: read from cfg.data if given, otherwise generated.
inline policy::DatasetSplit dataset_of(const json& cfg, std::uint64_t seed) {
    if (cfg.contains("data")) {
        const fs::path dir = cfg["data"].get<std::string>();
        return {policy::read_examples_jsonl((dir / "train.jsonl").string()), policy::read_examples_jsonl((dir / "test.jsonl").string())};
    }
    return policy::generate_dataset(table_of(cfg), cfg.value("n_base", 300), seed, cfg.value("n_test", 60));
}

inline json model_checkpoint(policy::PolicyNet<float>& net, std::uint64_t seed, const policy::PolicyTrainConfig& tc,
                             const policy::AugmentationConfig& aug) {
    auto j = net.to_json();
    j["seed"] = seed;
    j["training"] = tc.to_json();
    j["augmentation"] = {{"copies", aug.copies}};
    return j;
}

inline policy::PolicyNet<float> load_model(const std::string& path) {
    return policy::PolicyNet<float>::from_json(nn::read_json_file(path));
}

inline TrialConfig trial_of(const json& cfg) {
    TrialConfig t;
    const auto j = cfg.value("trial", json::object());
    t.max_retries = j.value("max_retries", t.max_retries);
    t.detection_noise = j.value("detection_noise", t.detection_noise);
    t.servo_noise = j.value("servo_noise", t.servo_noise);
    t.sensor_noise = j.value("sensor_noise", t.sensor_noise);
    t.slip = j.value("slip", t.slip);
    const auto servo = j.value("servo", std::string("Oracle"));
    if (servo == "Learned") t.servo_mode = perception::ServoMode::Learned;
    else if (servo != "Oracle") throw ModeError("unknown servo mode " + servo);
    return t;
}

inline std::vector<sim::PlateSpec> plates_of(const json& cfg) {
    if (!cfg.contains("plates")) return default_plate_specs();
    std::vector<sim::PlateSpec> out;
    for (const auto& p : cfg["plates"]) {
        auto s = p.is_string() ? sim::load_plate_spec(p.get<std::string>()) : sim::plate_spec_from_json(p);
        if (s.label.empty()) s.label = "plate" + std::to_string(out.size() + 1);
        out.push_back(std::move(s));
    }
    return out;
}

inline std::vector<std::string> modes_of(const json& cfg, std::vector<std::string> fallback) {
    return cfg.contains("modes") ? cfg["modes"].get<std::vector<std::string>>() : fallback;
}

/// Loads the learned servo model when the trial asks for it; the pointer
/// target must outlive the trials.
inline void attach_servo(const json& cfg, TrialConfig& t, std::optional<perception::ServoNet<float>>& holder) {
    if (t.servo_mode != perception::ServoMode::Learned) return;
    const auto j = cfg.value("trial", json::object());
    if (!j.contains("servo_model")) throw CheckpointError("learned servo requires trial.servo_model");
    holder = perception::ServoNet<float>::from_json(nn::read_json_file(j["servo_model"].get<std::string>()));
    t.servo_model = &*holder;
}

/// Policy for a mode name, loading its checkpoint from cfg.models or, for
/// compare, training it on the shared dataset when no checkpoint is given.
inline AcquisitionPolicy policy_for(const std::string& mode, const json& cfg, std::uint64_t seed,
                                    std::optional<policy::DatasetSplit>* data = nullptr) {
    if (mode == "Oracle") return oracle_policy();
    const auto pm = policy::policy_mode_from_string(mode);
    const auto models = cfg.value("models", json::object());
    if (models.contains(mode)) {
        auto net = load_model(models[mode].get<std::string>());
        if (net.mode() != pm) throw CheckpointError("checkpoint for " + mode + " holds a " + std::string(policy::to_string(net.mode())) + " model");
        return learned_policy(net);
    }
    if (!data) throw CheckpointError("no trained model for " + mode + " (set models." + mode + ")");
    if (!*data) *data = dataset_of(cfg, seed);
    const auto aug = augmentation_of(cfg);
    return learned_policy(policy::train_policy(policy::augment_all((*data)->train, aug, seed), pm, training_of(cfg), seed).model);
}

inline void cmd_gen_data(Context& c) {
    const auto d = dataset_of(c.config, c.seed);
    policy::write_examples_jsonl(c.artifact("train.jsonl").string(), d.train);
    policy::write_examples_jsonl(c.artifact("test.jsonl").string(), d.test);
    *c.log << "wrote " << d.train.size() << " train and " << d.test.size() << " test examples\n";
}

inline void cmd_train(Context& c) {
    const auto d = dataset_of(c.config, c.seed);
    const auto aug = augmentation_of(c.config);
    const auto tc = training_of(c.config);
    const auto train = policy::augment_all(d.train, aug, c.seed);
    std::ostringstream curve;
    curve << "mode,epoch,loss\n";
    for (const auto& name : modes_of(c.config, {"Multimodal"})) {
        auto res = policy::train_policy(train, policy::policy_mode_from_string(name), tc, c.seed);
        for (std::size_t e = 0; e < res.epoch_loss.size(); ++e) curve << name << ',' << e + 1 << ',' << policy::format_number(res.epoch_loss[e]) << '\n';
        write_text(c.artifact("model_" + name + ".json"), model_checkpoint(res.model, c.seed, tc, aug).dump() + "\n");
        const auto r = policy::evaluate_policy(res.model, d.test);
        *c.log << name << ": test accuracy " << r.overall.value() << "\n";
    }
    write_text(c.artifact("training_curve.csv"), curve.str());
}

inline void cmd_train_servo(Context& c) {
    perception::ServoDataConfig dc;
    dc.base_renders = c.config.value("base_renders", dc.base_renders);
    dc.total = c.config.value("samples", dc.total);
    perception::ServoTrainConfig tc;
    const auto t = c.config.value("training", json::object());
    tc.epochs = t.value("epochs", tc.epochs);
    tc.batch_size = t.value("batch", tc.batch_size);
    tc.lr = t.value("lr", tc.lr);
    tc.dilations = t.value("dilations", tc.dilations);
    tc.channels = t.value("channels", tc.channels);
    tc.seed = c.seed;
    const auto data = perception::generate_servo_dataset(table_of(c.config), c.seed, dc);
    const auto [train, held] = perception::split_servo_holdout(data);
    auto res = perception::train_servo_model(train, tc);
    const auto err = perception::keypoint_error(res.model, held);
    auto ck = res.model.to_json();
    ck["seed"] = c.seed;
    ck["training"] = {{"epochs", tc.epochs}, {"batch", tc.batch_size}, {"lr", tc.lr}};
    write_text(c.artifact("servo_model.json"), ck.dump() + "\n");
    json ev = {{"heldout_samples", err.count}, {"fork_px", err.fork}, {"food_px", err.food}, {"epoch_loss", res.epoch_loss}};
    write_text(c.artifact("servo_eval.json"), ev.dump(2) + "\n");
    *c.log << "held-out keypoint error: fork " << err.fork << " px, food " << err.food << " px\n";
}

inline void cmd_eval(Context& c) {
    if (!c.config.contains("model")) throw ConfigError("eval needs 'model'");
    auto net = load_model(c.config["model"].get<std::string>());
    const auto d = dataset_of(c.config, c.seed);
    auto cm = evaluate_confusion(net, d.test);
    auto j = cm.to_json();
    j["mode"] = std::string(policy::to_string(net.mode()));
    const auto r = policy::evaluate_policy(net, d.test);
    for (const auto& [tag, acc] : r.by_tag) j["by_tag"][tag] = {{"correct", acc.correct}, {"total", acc.total}, {"accuracy", acc.value()}};
    write_text(c.artifact("confusion.json"), j.dump(2) + "\n");
    *c.log << "accuracy " << cm.accuracy() << " (vertical " << cm.class_accuracy(policy::kVertical) << ", angled "
           << cm.class_accuracy(policy::kAngled) << ")\n";
}

inline void write_comparison(Context& c, const ComparisonReport& rep, const std::string& metrics_name) {
    std::ostringstream m, s;
    write_metrics_csv(rep.rows, m);
    write_summary_csv(rep, s);
    write_text(c.artifact(metrics_name), m.str());
    write_text(c.artifact("summary.csv"), s.str());
    for (const auto& mode : rep.modes()) *c.log << mode << ": success rate " << rep.total(mode).success_rate() << "\n";
}

inline void cmd_run_plates(Context& c) {
    const auto mode = c.config.value("mode", std::string("Oracle"));
    auto trial = trial_of(c.config);
    std::optional<perception::ServoNet<float>> servo;
    attach_servo(c.config, trial, servo);
    const auto pol = policy_for(mode, c.config, c.seed);
    const auto rep = compare_methods(plates_of(c.config), table_of(c.config), {pol}, c.config.value("n_seeds", 1), c.seed, trial);
    write_comparison(c, rep, "metrics.csv");
}

inline void cmd_compare(Context& c) {
    auto trial = trial_of(c.config);
    std::optional<perception::ServoNet<float>> servo;
    attach_servo(c.config, trial, servo);
    std::optional<policy::DatasetSplit> data;
    std::vector<AcquisitionPolicy> pols;
    for (const auto& m : modes_of(c.config, {"Oracle", "Multimodal", "VisionOnly", "HapticOnly", "OpenLoop"}))
        pols.push_back(policy_for(m, c.config, c.seed, &data));
    const auto rep = compare_methods(plates_of(c.config), table_of(c.config), pols, c.config.value("n_seeds", 30), c.seed, trial);
    write_comparison(c, rep, "comparison.csv");
}

inline void cmd_sweep(Context& c) {
    const auto d = dataset_of(c.config, c.seed);
    const auto fractions = c.config.value("fractions", std::vector<double>{0.10, 0.25, 0.50, 0.75, 1.00});
    const auto seeds = c.config.value("seeds", std::vector<std::uint64_t>{c.seed, c.seed + 1, c.seed + 2});
    const auto rows = policy::sample_efficiency_sweep(d.train, d.test, fractions, seeds, augmentation_of(c.config), training_of(c.config));
    std::ostringstream out;
    policy::write_sweep_csv(rows, out);
    write_text(c.artifact("sweep.csv"), out.str());
    *c.log << rows.size() << " sweep rows\n";
}

/// Gradient check of both trainable models on one generated sample each.
inline int cmd_gradcheck(Context& c) {
    const auto table = table_of(c.config);
    Rng rng(derive_seed(c.seed, fnv1a("gradcheck")));
    const auto names = policy::archetype_cycle(table);
    const auto ex = policy::make_example(table, names[c.seed % names.size()], derive_seed(c.seed, 1));
    policy::PolicyNet<double> pnet(policy::PolicyMode::Multimodal);
    pnet.init(rng);
    auto pp = pnet.params();
    const auto pr = nn::gradient_check(
        pp, [&] { return nn::cross_entropy(pnet.forward(ex), ex.label).loss; },
        [&] {
            for (auto* p : pp) p->grad.zero();
            pnet.backward(nn::cross_entropy(pnet.forward(ex), ex.label).grad);
        });

    perception::ServoDataConfig dc;
    dc.base_renders = 1;
    dc.total = 1;
    const auto s = perception::generate_servo_dataset(table, c.seed, dc).front();
    perception::ServoNet<double> snet;
    snet.init(rng);
    for (auto* p : snet.params())
        for (auto& v : p->value.data) v = uniform(rng, -0.3, 0.3);
    const auto x = perception::ServoNet<double>::input_tensor(s.image);
    const auto target = perception::servo_targets(s).cast<double>();
    auto sp = snet.params();
    const auto sr = nn::gradient_check(
        sp, [&] { return nn::sigmoid_bce(snet.forward(x), target).loss; },
        [&] {
            for (auto* p : sp) p->grad.zero();
            snet.backward(nn::sigmoid_bce(snet.forward(x), target).grad);
        });

    const double worst = std::max(pr.max_rel_error, sr.max_rel_error);
    json j = {{"policy", {{"max_rel_error", pr.max_rel_error}, {"worst", pr.worst_param}, {"checked", pr.checked}}},
              {"servo", {{"max_rel_error", sr.max_rel_error}, {"worst", sr.worst_param}, {"checked", sr.checked}}},
              {"max_rel_error", worst},
              {"threshold", 1e-4}};
    write_text(c.artifact("gradcheck.json"), j.dump(2) + "\n");
    *c.log << "max relative error " << worst << " (policy " << pr.max_rel_error << ", servo " << sr.max_rel_error << ")\n";
    return worst < 1e-4 ? 0 : 2;
}

inline void cmd_export_embeddings(Context& c) {
    if (!c.config.contains("model")) throw ConfigError("export-embeddings needs 'model'");
    auto net = load_model(c.config["model"].get<std::string>());
    if (net.mode() != policy::PolicyMode::Multimodal) throw ModeError("embeddings are only defined for Multimodal models");
    const auto d = dataset_of(c.config, c.seed);
    std::ostringstream out;
    policy::export_embeddings(net, c.config.value("split", std::string("test")) == "train" ? d.train : d.test, out);
    write_text(c.artifact("embeddings.csv"), out.str());
}

}  // namespace cli_detail

/// Entry point behind the `skewersim` binary. Returns 0 on success, 1 for
/// usage and validation errors, 2 for runtime failures.
inline int run_cli(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    using namespace cli_detail;
    CLI::App app{"Simulated bite acquisition: data, training, evaluation and plate experiments"};
    app.require_subcommand(1);
    std::string config_path, out_dir = "out";
    std::uint64_t seed = 0;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"gen-data", "generate probe examples (train.jsonl, test.jsonl)"},
        {"train", "train policy models"},
        {"train-servo", "train the servo heatmap model"},
        {"eval", "confusion matrix of a policy checkpoint on the test split"},
        {"run-plates", "plate-clearing experiments for one policy"},
        {"compare", "all policies on all plates"},
        {"sweep", "test accuracy against training-set fraction"},
        {"gradcheck", "finite-difference check of both models"},
        {"export-embeddings", "fused embeddings of a multimodal checkpoint as CSV"},
    };
    for (const auto& [name, help] : commands) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--config", config_path, "JSON config file");
        sub->add_option("--seed", seed, "master seed");
        sub->add_option("--out", out_dir, "output directory");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e, out, err);
        return rc == 0 ? 0 : 1;
    }
    Context c;
    c.command = app.get_subcommands().front()->get_name();
    c.seed = seed;
    c.out = out_dir;
    c.log = &out;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        c.config = load_config(config_path);
        if (c.config.contains("seed") && app.get_subcommands().front()->count("--seed") == 0) c.seed = c.config["seed"].get<std::uint64_t>();
        fs::create_directories(c.out);
        int rc = 0;
        if (c.command == "gen-data") cmd_gen_data(c);
        else if (c.command == "train") cmd_train(c);
        else if (c.command == "train-servo") cmd_train_servo(c);
        else if (c.command == "eval") cmd_eval(c);
        else if (c.command == "run-plates") cmd_run_plates(c);
        else if (c.command == "compare") cmd_compare(c);
        else if (c.command == "sweep") cmd_sweep(c);
        else if (c.command == "gradcheck") rc = cmd_gradcheck(c);
        else if (c.command == "export-embeddings") cmd_export_embeddings(c);
        const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_text(c.out / "manifest.json", make_manifest(c.command, c.config, c.seed, wall, c.artifacts).dump(2) + "\n");
        return rc;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return e.exit_code();
    } catch (const json::exception& e) {
        err << "error: invalid config: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace skewersim::harness
