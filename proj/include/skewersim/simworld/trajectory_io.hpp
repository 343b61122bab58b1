#pragma once

#include <ostream>
#include <vector>

#include "json.hpp"
#include "skewersim/simworld/primitives.hpp"

namespace skewersim::sim {

/// One JSON object per control step: {t, x, y, z, beta, gamma, force}.
inline void write_trajectory_jsonl(std::ostream& os, const std::vector<TrajectoryPoint>& traj) {
    for (const auto& p : traj) {
        nlohmann::json j = {{"t", p.t}, {"x", p.x}, {"y", p.y}, {"z", p.z},
                            {"beta", p.beta}, {"gamma", p.gamma}, {"force", p.force}};
        os << j.dump() << '\n';
    }
}

inline std::vector<TrajectoryPoint> read_trajectory_jsonl(std::istream& is) {
    std::vector<TrajectoryPoint> out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto j = nlohmann::json::parse(line);
        out.push_back({j.at("t"), j.at("x"), j.at("y"), j.at("z"), j.at("beta"), j.at("gamma"), j.at("force")});
    }
    return out;
}

}  // namespace skewersim::sim
