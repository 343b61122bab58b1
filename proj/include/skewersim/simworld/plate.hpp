#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewersim/simworld/archetypes.hpp"

namespace skewersim::sim {

struct PlateSpec {
    struct Entry {
        std::string name;
        int count = 0;
    };
    std::string label;  // free-form name used in reports
    std::vector<Entry> archetypes;
    double plate_radius = 0.12;
    std::uint64_t seed = 0;

    int total_items() const {
        int n = 0;
        for (const auto& e : archetypes) n += e.count;
        return n;
    }
};

inline nlohmann::json to_json(const PlateSpec& s) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : s.archetypes) arr.push_back({{"name", e.name}, {"count", e.count}});
    return {{"label", s.label}, {"archetypes", arr}, {"plate_radius", s.plate_radius}, {"seed", s.seed}};
}

inline PlateSpec plate_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("archetypes")) throw ConfigError("plate spec needs 'archetypes'");
    PlateSpec s;
    s.label = j.value("label", "");
    s.plate_radius = j.value("plate_radius", 0.12);
    s.seed = j.value("seed", std::uint64_t{0});
    for (const auto& e : j.at("archetypes")) {
        PlateSpec::Entry entry{e.at("name").get<std::string>(), e.at("count").get<int>()};
        if (entry.count < 0) throw ConfigError("negative archetype count");
        s.archetypes.push_back(entry);
    }
    return s;
}

inline PlateSpec load_plate_spec(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError("plate spec '" + path + "'");
    try {
        return plate_spec_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
}

inline constexpr int kMaxPlacementAttempts = 10000;
inline constexpr double kPlacementGap = 0.004;  // m between neighbouring footprints

/// Samples items from their archetype distributions and places them by
/// rejection sampling. Neighbours keep their major semi-axes plus a small gap
/// apart, which implies the minor-semi-axis non-overlap invariant.
inline PlateState spawn_plate(const PlateSpec& spec, const ArchetypeTable& table, std::uint64_t seed) {
    if (spec.total_items() > kMaxPlateItems)
        throw ConfigError("plate holds at most 12 items, spec asks for " + std::to_string(spec.total_items()));
    if (!(spec.plate_radius > 0.0)) throw ConfigError("plate radius must be positive");
    PlateState plate;
    plate.plate_radius = spec.plate_radius;
    Rng rng(derive_seed(seed, 0x91a7e));
    int next_id = 0;
    for (const auto& entry : spec.archetypes) {
        auto it = table.find(entry.name);
        if (it == table.end()) throw ConfigError("unknown archetype '" + entry.name + "'");
        for (int c = 0; c < entry.count; ++c) {
            FoodItem item = sample_item(it->second, next_id++, rng);
            const double reach = spec.plate_radius - 0.5 * item.major_axis;
            if (reach <= 0.0) throw PlacementInfeasibleError("item larger than plate");
            bool placed = false;
            for (int attempt = 0; attempt < kMaxPlacementAttempts && !placed; ++attempt) {
                const double r = reach * std::sqrt(uniform(rng, 0.0, 1.0));
                const double th = uniform(rng, 0.0, 2.0 * std::numbers::pi);
                const Vec2 c{r * std::cos(th), r * std::sin(th)};
                placed = true;
                for (const auto& other : plate.items) {
                    const double need = 0.5 * (item.major_axis + other.major_axis) + kPlacementGap;
                    if ((c - other.center).norm() <= need) {
                        placed = false;
                        break;
                    }
                }
                if (placed) item.center = c;
            }
            if (!placed)
                throw PlacementInfeasibleError("could not place item " + std::to_string(item.id) + " (" +
                                               entry.name + ") after 10000 attempts");
            plate.items.push_back(std::move(item));
        }
    }
    return plate;
}

inline PlateState remove_item(const PlateState& plate, int id) {
    PlateState out = plate;
    auto it = std::find_if(out.items.begin(), out.items.end(), [id](const FoodItem& f) { return f.id == id; });
    if (it == out.items.end()) throw NotFoundError("item id " + std::to_string(id));
    out.items.erase(it);
    return out;
}

}  // namespace skewersim::sim
