#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewersim/perception/image.hpp"
#include "skewersim/simworld/types.hpp"

namespace skewersim::policy {

using perception::Image;

/// Class index 0 is VerticalSkewer, 1 is AngledSkewer.
inline constexpr int kVertical = 0;
inline constexpr int kAngled = 1;

inline sim::Primitive label_primitive(int label) {
    return label == kVertical ? sim::Primitive::VerticalSkewer : sim::Primitive::AngledSkewer;
}

/// Hard items are skewered vertically, soft ones at an angle.
inline int label_for(sim::Compliance c) { return c == sim::Compliance::Hard ? kVertical : kAngled; }

enum Tag : unsigned {
    kMisleadingPair = 1u << 0,
    kHeterogeneousContact = 1u << 1,
    kThinPlateContact = 1u << 2,
};

inline std::vector<std::string> tag_names(unsigned tags) {
    std::vector<std::string> out;
    if (tags & kMisleadingPair) out.emplace_back("MisleadingPair");
    if (tags & kHeterogeneousContact) out.emplace_back("HeterogeneousContact");
    if (tags & kThinPlateContact) out.emplace_back("ThinPlateContact");
    return out;
}

inline unsigned tags_from_names(const std::vector<std::string>& names) {
    unsigned t = 0;
    for (const auto& n : names) {
        if (n == "MisleadingPair") t |= kMisleadingPair;
        else if (n == "HeterogeneousContact") t |= kHeterogeneousContact;
        else if (n == "ThinPlateContact") t |= kThinPlateContact;
        else throw InputError("unknown tag " + n);
    }
    return t;
}

struct Example {
    Image image;          // post-contact local view
    Image overhead_crop;  // pre-contact overhead patch, used by the open-loop baseline
    std::vector<double> trace;
    int label = kVertical;
    std::string archetype;
    unsigned tags = 0;
    sim::Compliance compliance = sim::Compliance::Hard;  // hidden ground truth
};

inline nlohmann::json to_json(const Example& e) {
    return {{"image", perception::image_to_json(e.image)},
            {"overhead_crop", perception::image_to_json(e.overhead_crop)},
            {"trace", e.trace},
            {"label", std::string(sim::to_string(label_primitive(e.label)))},
            {"archetype", e.archetype},
            {"tags", tag_names(e.tags)},
            {"compliance", e.compliance == sim::Compliance::Hard ? "Hard" : "Soft"}};
}

inline Example example_from_json(const nlohmann::json& j) {
    Example e;
    e.image = perception::image_from_json(j.at("image"));
    if (j.contains("overhead_crop")) e.overhead_crop = perception::image_from_json(j.at("overhead_crop"));
    e.trace = j.at("trace").get<std::vector<double>>();
    if (e.trace.size() != static_cast<std::size_t>(sim::kTraceLength)) throw InputError("trace must have 26 samples");
    const auto label = j.at("label").get<std::string>();
    if (label == "VerticalSkewer") e.label = kVertical;
    else if (label == "AngledSkewer") e.label = kAngled;
    else throw InputError("unknown label " + label);
    e.archetype = j.value("archetype", "");
    e.tags = tags_from_names(j.value("tags", std::vector<std::string>{}));
    e.compliance = j.value("compliance", label == "VerticalSkewer" ? "Hard" : "Soft") == "Hard" ? sim::Compliance::Hard
                                                                                               : sim::Compliance::Soft;
    return e;
}

inline void write_examples_jsonl(const std::string& path, const std::vector<Example>& xs) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    for (const auto& e : xs) out << to_json(e).dump() << '\n';
}

inline std::vector<Example> read_examples_jsonl(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError(path);
    std::vector<Example> out;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        try {
            out.push_back(example_from_json(nlohmann::json::parse(line)));
        } catch (const nlohmann::json::exception& e) {
            throw InputError(path + ": " + e.what());
        }
    }
    return out;
}

/// FNV-1a over the serialized example; used for determinism checks.
inline std::uint64_t checksum(const Example& e) { return fnv1a(to_json(e).dump()); }

}  // namespace skewersim::policy
