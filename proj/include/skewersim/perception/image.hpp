#pragma once

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "skewersim/common.hpp"

namespace skewersim::perception {

using Rgb = std::array<float, 3>;

/// Row-major HWC float image, values in [0,1].
struct Image {
    int width = 0;
    int height = 0;
    std::vector<float> data;

    Image() = default;
    Image(int w, int h, Rgb fill = {0, 0, 0}) : width(w), height(h), data(static_cast<std::size_t>(w * h * 3)) {
        for (int i = 0; i < w * h; ++i)
            for (int c = 0; c < 3; ++c) data[static_cast<std::size_t>(3 * i + c)] = fill[static_cast<std::size_t>(c)];
    }

    float& at(int row, int col, int ch) { return data[static_cast<std::size_t>((row * width + col) * 3 + ch)]; }
    float at(int row, int col, int ch) const { return data[static_cast<std::size_t>((row * width + col) * 3 + ch)]; }

    Rgb pixel(int row, int col) const { return {at(row, col, 0), at(row, col, 1), at(row, col, 2)}; }
    void set(int row, int col, Rgb v) {
        for (int c = 0; c < 3; ++c) at(row, col, c) = std::clamp(v[static_cast<std::size_t>(c)], 0.0f, 1.0f);
    }
    bool inside(int row, int col) const { return row >= 0 && col >= 0 && row < height && col < width; }

    friend bool operator==(const Image&, const Image&) = default;
};

inline Rgb hsv_to_rgb(double h, double s, double v) {
    h -= std::floor(h);
    const double hh = h * 6.0;
    const int sector = static_cast<int>(hh) % 6;
    const double f = hh - std::floor(hh);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    double r = 0, g = 0, b = 0;
    switch (sector) {
        case 0: r = v, g = t, b = p; break;
        case 1: r = q, g = v, b = p; break;
        case 2: r = p, g = v, b = t; break;
        case 3: r = p, g = q, b = v; break;
        case 4: r = t, g = p, b = v; break;
        default: r = v, g = p, b = q; break;
    }
    return {static_cast<float>(r), static_cast<float>(g), static_cast<float>(b)};
}

/// Binary P6 with 8-bit channels.
inline void write_ppm(const std::string& path, const Image& img) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << "P6\n" << img.width << ' ' << img.height << "\n255\n";
    for (float v : img.data) out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
}

inline Image read_ppm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError(path);
    std::string magic;
    int w = 0, h = 0, maxv = 0;
    in >> magic >> w >> h >> maxv;
    in.get();
    if (magic != "P6" || maxv != 255) throw InputError(path + ": not an 8-bit P6 file");
    Image img(w, h);
    for (auto& v : img.data) v = static_cast<float>(static_cast<unsigned char>(in.get())) / 255.0f;
    return img;
}

/// Nested [row][col][channel] array.
inline nlohmann::json image_to_json(const Image& img) {
    nlohmann::json rows = nlohmann::json::array();
    for (int r = 0; r < img.height; ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (int c = 0; c < img.width; ++c) row.push_back({img.at(r, c, 0), img.at(r, c, 1), img.at(r, c, 2)});
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Image image_from_json(const nlohmann::json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) throw InputError("image must be a nested array");
    Image img(static_cast<int>(j[0].size()), static_cast<int>(j.size()));
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            for (int ch = 0; ch < 3; ++ch) img.at(r, c, ch) = j[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)][static_cast<std::size_t>(ch)].get<float>();
    return img;
}

}  // namespace skewersim::perception
