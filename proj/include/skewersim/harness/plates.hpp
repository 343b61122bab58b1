#pragma once

#include "skewersim/simworld/plate.hpp"

namespace skewersim::harness {

/// Six evaluation plates: mixed seen foods, unseen fruit, a misleading pair,
/// a heterogeneous plate, unseen soft/hard mixes.
inline std::vector<sim::PlateSpec> default_plate_specs() {
    return {
        {"plate1", {{"banana", 2}, {"broccoli", 2}, {"raw_zucchini", 2}, {"raw_carrot", 2}, {"grape", 1}, {"celery", 1}}},
        {"plate2", {{"pineapple", 2}, {"mango", 2}, {"dragonfruit", 2}, {"cantaloupe", 2}, {"honeydew", 1}, {"pear", 1}}},
        {"plate3", {{"raw_squash", 5}, {"boiled_squash", 5}}},
        {"plate4", {{"broccoli", 10}}},
        {"plate5", {{"pasta", 3}, {"dumpling", 2}, {"boiled_yam", 3}, {"raw_yam", 2}}},
        {"plate6", {{"mochi", 4}, {"snow_pea", 3}, {"canned_pear", 3}}},
    };
}

}  // namespace skewersim::harness
