#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

namespace skewersim {

/// Base of every error thrown by the library. `exit_code()` feeds the CLI:
/// 1 for validation problems, 2 for runtime failures.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what, int exit_code = 2)
        : std::runtime_error(what), exit_code_(exit_code) {}
    int exit_code() const noexcept { return exit_code_; }

private:
    int exit_code_;
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& w) : Error("config error: " + w, 1) {}
};
struct NotFoundError : Error {
    explicit NotFoundError(const std::string& w) : Error("not found: " + w, 1) {}
};
struct PlacementInfeasibleError : Error {
    explicit PlacementInfeasibleError(const std::string& w) : Error("placement infeasible: " + w) {}
};
struct InvalidStartError : Error {
    explicit InvalidStartError(const std::string& w) : Error("invalid start: " + w) {}
};
struct TargetLostError : Error {
    explicit TargetLostError(const std::string& w) : Error("target lost: " + w) {}
};
struct NoItemError : Error {
    explicit NoItemError(const std::string& w) : Error("no item: " + w) {}
};
struct DimensionError : Error {
    explicit DimensionError(const std::string& w) : Error("dimension error: " + w) {}
};
struct StateError : Error {
    explicit StateError(const std::string& w) : Error("state error: " + w) {}
};
struct InputError : Error {
    explicit InputError(const std::string& w) : Error("input error: " + w, 1) {}
};
struct ModeError : Error {
    explicit ModeError(const std::string& w) : Error("mode error: " + w, 1) {}
};
struct CheckpointError : Error {
    explicit CheckpointError(const std::string& w) : Error("checkpoint error: " + w, 1) {}
};

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent, order-free rng streams.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed) noexcept { return mix64(seed); }

template <typename... Rest>
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t key, Rest... rest) noexcept {
    return derive_seed(mix64(seed ^ mix64(key + 0x632be59bd9b4e019ULL)), static_cast<std::uint64_t>(rest)...);
}

inline double uniform(Rng& rng, double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline double gaussian(Rng& rng, double sigma) {
    if (sigma <= 0.0) return 0.0;
    return std::normal_distribution<double>(0.0, sigma)(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    if (p <= 0.0) return false;
    if (p >= 1.0) return true;
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng) < p;
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

inline double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
    friend bool operator==(Vec2, Vec2) = default;
    double norm() const { return std::hypot(x, y); }
};

struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;
    friend bool operator==(Vec3, Vec3) = default;
};

/// 64-bit FNV-1a, used for config hashes and dataset checksums.
inline std::uint64_t fnv1a(const void* data, std::size_t n,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    return fnv1a(s.data(), s.size(), h);
}

inline std::string hex64(std::uint64_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string out(16, '0');
    for (int i = 15; i >= 0; --i) {
        out[static_cast<std::size_t>(i)] = digits[v & 0xf];
        v >>= 4;
    }
    return out;
}

inline constexpr const char* kVersion = "0.1.0";

}  // namespace skewersim
