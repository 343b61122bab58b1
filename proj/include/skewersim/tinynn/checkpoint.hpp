#pragma once

#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewersim/tinynn/tensor.hpp"

namespace skewersim::nn {

/// One layer's entry in a checkpoint: kind plus named flat arrays.
template <typename T>
nlohmann::json layer_to_json(const std::string& kind, const std::vector<Param<T>*>& params) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto* p : params)
        arr.push_back({{"name", p->name}, {"shape", p->value.shape}, {"data", p->value.data}});
    return {{"kind", kind}, {"params", arr}};
}

template <typename T>
void layer_from_json(const nlohmann::json& j, const std::string& kind, const std::vector<Param<T>*>& params) {
    if (j.at("kind").get<std::string>() != kind)
        throw CheckpointError("expected layer kind " + kind + ", found " + j.at("kind").get<std::string>());
    const auto& arr = j.at("params");
    if (arr.size() != params.size()) throw CheckpointError(kind + ": parameter count mismatch");
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto shape = arr[k].at("shape").get<std::vector<int>>();
        if (shape != params[k]->value.shape) throw CheckpointError(kind + "." + params[k]->name + ": shape mismatch");
        const auto data = arr[k].at("data").get<std::vector<double>>();
        if (data.size() != params[k]->value.size()) throw CheckpointError(kind + ": data length mismatch");
        for (std::size_t i = 0; i < data.size(); ++i) {
            if (!std::isfinite(data[i])) throw CheckpointError(kind + ": non-finite parameter");
            params[k]->value[i] = static_cast<T>(data[i]);
        }
    }
}

inline void write_json_file(const std::string& path, const nlohmann::json& j) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path);
    out << j.dump() << '\n';
}

inline nlohmann::json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NotFoundError(path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw InputError(path + ": " + e.what());
    }
}

}  // namespace skewersim::nn
