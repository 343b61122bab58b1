#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewersim/simworld/types.hpp"

namespace skewersim::sim {

struct Range {
    double lo = 0.0;
    double hi = 0.0;
    double sample(Rng& rng) const { return lo == hi ? lo : uniform(rng, lo, hi); }
};

/// Distribution bounds for one food archetype. Items drawn from the same
/// misleading group share geometry and appearance bounds but not material.
struct Archetype {
    std::string name;
    Compliance compliance = Compliance::Hard;
    Range stiffness;
    Range fracture_force;
    Range pierce_force;  // force needed to engage the tines, sets pierce_depth = force / k_max
    Range height;
    Range major_axis;
    Range minor_ratio;   // minor / major
    double hue = 0.0;
    double hue_spread = 0.0;
    Range saturation;
    double value = 0.8;
    std::vector<Subregion> subregions{{0.0, 1.0, 1.0}};
    std::string misleading_group;  // empty when the archetype has no visual twin
    bool seen = true;              // part of the training distribution

    double nominal_height() const { return height.hi; }
    bool heterogeneous() const { return subregions.size() > 1; }
};

using ArchetypeTable = std::map<std::string, Archetype>;

/// Draws one item (centre left at the origin). Geometry and appearance are
/// drawn before the material so visual twins with a shared seed render identically.
inline FoodItem sample_item(const Archetype& a, int id, Rng& rng) {
    FoodItem item;
    item.id = id;
    item.archetype = a.name;
    item.major_axis = a.major_axis.sample(rng);
    item.minor_axis = item.major_axis * std::min(1.0, a.minor_ratio.sample(rng));
    item.height = a.height.sample(rng);
    item.axis_angle = uniform(rng, 0.0, std::numbers::pi);
    item.appearance.base_hue = a.hue + uniform(rng, -a.hue_spread, a.hue_spread);
    item.appearance.base_hue -= std::floor(item.appearance.base_hue);
    item.appearance.saturation = a.saturation.sample(rng);
    item.appearance.value = a.value;
    item.appearance.shape_eccentricity = 1.0 - item.minor_axis / item.major_axis;
    item.nominal_height = a.nominal_height();

    MaterialProfile& m = item.material;
    m.compliance_class = a.compliance;
    m.stiffness = a.stiffness.sample(rng);
    m.fracture_force = a.fracture_force.sample(rng);
    m.subregions = a.subregions;
    const double pierce_force = a.pierce_force.sample(rng);
    const double max_fraction = a.compliance == Compliance::Hard ? 0.8 : 0.5;
    m.pierce_depth =
        std::min(pierce_force / (m.stiffness * m.max_multiplier()), max_fraction * item.height);
    return item;
}

namespace detail {

inline nlohmann::json range_json(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

inline Range range_from(const nlohmann::json& j, const std::string& key) {
    if (!j.contains(key)) throw ConfigError("archetype missing field '" + key + "'");
    const auto& v = j.at(key);
    if (v.is_number()) return {v.get<double>(), v.get<double>()};
    if (!v.is_array() || v.size() != 2) throw ConfigError("field '" + key + "' must be [lo, hi]");
    Range r{v[0].get<double>(), v[1].get<double>()};
    if (r.lo > r.hi) throw ConfigError("field '" + key + "' has lo > hi");
    return r;
}

}  // namespace detail

inline nlohmann::json to_json(const Archetype& a) {
    using detail::range_json;
    nlohmann::json sub = nlohmann::json::array();
    for (const auto& s : a.subregions) sub.push_back({s.r_from, s.r_to, s.multiplier});
    return {{"compliance", std::string(to_string(a.compliance))},
            {"stiffness", range_json(a.stiffness)},
            {"fracture_force", range_json(a.fracture_force)},
            {"pierce_force", range_json(a.pierce_force)},
            {"height", range_json(a.height)},
            {"major_axis", range_json(a.major_axis)},
            {"minor_ratio", range_json(a.minor_ratio)},
            {"hue", a.hue},
            {"hue_spread", a.hue_spread},
            {"saturation", range_json(a.saturation)},
            {"value", a.value},
            {"subregions", sub},
            {"misleading_group", a.misleading_group},
            {"seen", a.seen}};
}

inline Archetype archetype_from_json(const std::string& name, const nlohmann::json& j) {
    using detail::range_from;
    Archetype a;
    a.name = name;
    const std::string c = j.value("compliance", "");
    if (c == "Hard") a.compliance = Compliance::Hard;
    else if (c == "Soft") a.compliance = Compliance::Soft;
    else throw ConfigError("archetype '" + name + "' has unknown compliance '" + c + "'");
    a.stiffness = range_from(j, "stiffness");
    a.fracture_force = range_from(j, "fracture_force");
    a.pierce_force = range_from(j, "pierce_force");
    a.height = range_from(j, "height");
    a.major_axis = range_from(j, "major_axis");
    a.minor_ratio = range_from(j, "minor_ratio");
    a.hue = j.value("hue", 0.0);
    a.hue_spread = j.value("hue_spread", 0.0);
    a.saturation = range_from(j, "saturation");
    a.value = j.value("value", 0.8);
    if (j.contains("subregions")) {
        a.subregions.clear();
        for (const auto& s : j.at("subregions")) {
            if (!s.is_array() || s.size() != 3) throw ConfigError("subregion must be [from, to, multiplier]");
            a.subregions.push_back({s[0].get<double>(), s[1].get<double>(), s[2].get<double>()});
        }
    }
    a.misleading_group = j.value("misleading_group", "");
    a.seen = j.value("seen", true);

    // Validate the extreme corners of the distribution through MaterialProfile.
    MaterialProfile probe;
    probe.compliance_class = a.compliance;
    probe.subregions = a.subregions;
    for (double k : {a.stiffness.lo, a.stiffness.hi}) {
        probe.stiffness = k;
        probe.fracture_force = a.fracture_force.lo;
        try {
            probe.validate();
        } catch (const ConfigError& e) {
            throw ConfigError("archetype '" + name + "': " + e.what());
        }
    }
    if (!(a.height.lo > 0.0) || a.height.hi > 0.05) throw ConfigError("archetype '" + name + "': height out of (0, 0.05]");
    if (!(a.major_axis.lo > 0.0) || !(a.minor_ratio.lo > 0.0) || a.minor_ratio.hi > 1.0)
        throw ConfigError("archetype '" + name + "': bad axis bounds");
    return a;
}

inline nlohmann::json to_json(const ArchetypeTable& t) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [name, a] : t) j[name] = to_json(a);
    return j;
}

inline ArchetypeTable archetype_table_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ConfigError("archetype table must be a JSON object keyed by name");
    ArchetypeTable t;
    for (const auto& [name, v] : j.items()) t.emplace(name, archetype_from_json(name, v));
    return t;
}

inline ArchetypeTable load_archetype_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("archetype table '" + path + "'");
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return archetype_table_from_json(j);
}

/// Built-in food set: seen archetypes form the training distribution, the
/// unseen ones populate the generalisation plates.
inline ArchetypeTable default_archetype_table() {
    ArchetypeTable t;
    const Range hard_fracture{35.0, 60.0};
    const Range hard_pierce{14.0, 20.0};
    const Range soft_pierce{0.2, 0.5};
    const Range tall{0.016, 0.022};

    auto add = [&t](Archetype a) { t.emplace(a.name, std::move(a)); };
    auto twin = [](Archetype raw, std::string name, Range k, Range fracture) {
        raw.name = std::move(name);
        raw.compliance = Compliance::Soft;
        raw.stiffness = k;
        raw.fracture_force = fracture;
        raw.pierce_force = {0.2, 0.5};
        return raw;
    };

    Archetype squash{"raw_squash", Compliance::Hard, {1500, 2600}, hard_fracture, hard_pierce,
                     tall, {0.024, 0.030}, {0.80, 1.00}, 0.09, 0.01, {0.75, 0.85}, 0.90,
                     {{0.0, 1.0, 1.0}}, "squash", true};
    add(squash);
    add(twin(squash, "boiled_squash", {40, 200}, {3.0, 8.0}));

    Archetype carrot{"raw_carrot", Compliance::Hard, {3500, 5500}, hard_fracture, hard_pierce,
                     {0.016, 0.020}, {0.020, 0.026}, {0.85, 1.00}, 0.03, 0.01, {0.85, 0.95}, 0.85,
                     {{0.0, 1.0, 1.0}}, "carrot", true};
    add(carrot);
    add(twin(carrot, "boiled_carrot", {40, 200}, {3.0, 8.0}));

    Archetype zucchini{"raw_zucchini", Compliance::Hard, {1800, 3000}, hard_fracture, hard_pierce,
                       tall, {0.026, 0.034}, {0.55, 0.70}, 0.20, 0.01, {0.50, 0.60}, 0.75,
                       {{0.0, 1.0, 1.0}}, "zucchini", true};
    add(zucchini);
    add(twin(zucchini, "boiled_zucchini", {40, 200}, {3.0, 8.0}));

    // Florets: a soft head over the centre of the footprint, stiff stem at the rim.
    add({"broccoli", Compliance::Hard, {2000, 3200}, hard_fracture, hard_pierce, {0.018, 0.025},
         {0.024, 0.032}, {0.70, 0.90}, 0.33, 0.01, {0.80, 0.90}, 0.55,
         {{0.0, 0.55, 0.04}, {0.55, 1.0, 1.0}}, "", true});
    add({"grape", Compliance::Hard, {1200, 2000}, hard_fracture, hard_pierce, {0.016, 0.020},
         {0.018, 0.022}, {0.80, 0.95}, 0.85, 0.01, {0.55, 0.65}, 0.60, {{0.0, 1.0, 1.0}}, "", true});
    add({"cheddar", Compliance::Hard, {2500, 4000}, hard_fracture, hard_pierce, {0.016, 0.020},
         {0.020, 0.026}, {0.90, 1.00}, 0.14, 0.01, {0.70, 0.80}, 0.95, {{0.0, 1.0, 1.0}}, "", true});
    add({"celery", Compliance::Hard, {4000, 6000}, hard_fracture, hard_pierce, {0.016, 0.020},
         {0.030, 0.040}, {0.40, 0.50}, 0.27, 0.01, {0.45, 0.55}, 0.80, {{0.0, 1.0, 1.0}}, "", true});
    add({"apple", Compliance::Hard, {1800, 2800}, hard_fracture, hard_pierce, tall,
         {0.022, 0.028}, {0.70, 0.85}, 0.99, 0.01, {0.75, 0.85}, 0.80, {{0.0, 1.0, 1.0}}, "", true});

    // Thin slices: k * height stays below the contact threshold, so a probe only registers the plate.
    add({"banana", Compliance::Soft, {15, 28}, {2.0, 4.0}, {0.02, 0.05}, {0.0020, 0.0034},
         {0.026, 0.032}, {0.90, 1.00}, 0.15, 0.01, {0.25, 0.35}, 0.95, {{0.0, 1.0, 1.0}}, "", true});
    add({"kiwi", Compliance::Soft, {60, 150}, {3.0, 8.0}, soft_pierce, {0.012, 0.018},
         {0.022, 0.028}, {0.85, 1.00}, 0.23, 0.01, {0.65, 0.75}, 0.60, {{0.0, 1.0, 1.0}}, "", true});
    add({"mango", Compliance::Soft, {40, 120}, {3.0, 8.0}, soft_pierce, tall, {0.024, 0.030},
         {0.75, 0.90}, 0.11, 0.01, {0.85, 0.95}, 0.95, {{0.0, 1.0, 1.0}}, "", true});
    add({"avocado", Compliance::Soft, {50, 130}, {3.0, 8.0}, soft_pierce, tall, {0.024, 0.030},
         {0.75, 0.90}, 0.30, 0.01, {0.25, 0.35}, 0.60, {{0.0, 1.0, 1.0}}, "", true});
    add({"mozzarella", Compliance::Soft, {150, 280}, {2.5, 6.0}, soft_pierce, tall, {0.022, 0.028},
         {0.85, 1.00}, 0.10, 0.01, {0.03, 0.08}, 1.00, {{0.0, 1.0, 1.0}}, "", true});

    // Unseen foods.
    add({"pineapple", Compliance::Hard, {1500, 2500}, hard_fracture, hard_pierce, tall,
         {0.024, 0.030}, {0.80, 0.95}, 0.13, 0.01, {0.75, 0.85}, 0.90, {{0.0, 1.0, 1.0}}, "", false});
    add({"pear", Compliance::Hard, {1000, 1800}, hard_fracture, hard_pierce, tall, {0.024, 0.030},
         {0.75, 0.90}, 0.18, 0.01, {0.45, 0.55}, 0.85, {{0.0, 1.0, 1.0}}, "", false});
    add({"dragonfruit", Compliance::Soft, {30, 100}, {3.0, 8.0}, soft_pierce, tall, {0.024, 0.030},
         {0.80, 0.95}, 0.92, 0.01, {0.45, 0.55}, 0.70, {{0.0, 1.0, 1.0}}, "", false});
    add({"cantaloupe", Compliance::Soft, {60, 160}, {3.0, 8.0}, soft_pierce, tall, {0.024, 0.030},
         {0.80, 0.95}, 0.07, 0.01, {0.55, 0.65}, 0.90, {{0.0, 1.0, 1.0}}, "", false});
    add({"honeydew", Compliance::Soft, {60, 160}, {3.0, 8.0}, soft_pierce, tall, {0.024, 0.030},
         {0.80, 0.95}, 0.22, 0.01, {0.35, 0.45}, 0.90, {{0.0, 1.0, 1.0}}, "", false});
    add({"pasta", Compliance::Soft, {15, 25}, {2.0, 4.0}, {0.02, 0.05}, {0.0025, 0.0035},
         {0.028, 0.036}, {0.50, 0.70}, 0.12, 0.01, {0.35, 0.45}, 0.95, {{0.0, 1.0, 1.0}}, "", false});
    add({"dumpling", Compliance::Soft, {60, 150}, {0.8, 1.6}, soft_pierce, tall, {0.026, 0.034},
         {0.65, 0.80}, 0.10, 0.01, {0.10, 0.20}, 0.95, {{0.0, 1.0, 1.0}}, "", false});
    Archetype yam{"raw_yam", Compliance::Hard, {2000, 3500}, hard_fracture, hard_pierce, tall,
                  {0.022, 0.028}, {0.80, 1.00}, 0.06, 0.01, {0.55, 0.65}, 0.70,
                  {{0.0, 1.0, 1.0}}, "yam", false};
    add(yam);
    add(twin(yam, "boiled_yam", {40, 200}, {3.0, 8.0}));
    add({"mochi", Compliance::Soft, {30, 80}, {3.0, 8.0}, soft_pierce, tall, {0.024, 0.030},
         {0.85, 1.00}, 0.95, 0.01, {0.25, 0.35}, 0.95, {{0.0, 1.0, 1.0}}, "", false});
    add({"snow_pea", Compliance::Hard, {1500, 2500}, hard_fracture, hard_pierce, {0.005, 0.007},
         {0.034, 0.040}, {0.30, 0.40}, 0.30, 0.01, {0.75, 0.85}, 0.60, {{0.0, 1.0, 1.0}}, "", false});
    add({"canned_pear", Compliance::Soft, {40, 100}, {3.0, 8.0}, soft_pierce, tall,
         {0.024, 0.030}, {0.75, 0.90}, 0.15, 0.01, {0.25, 0.35}, 0.90, {{0.0, 1.0, 1.0}}, "", false});
    return t;
}

}  // namespace skewersim::sim
