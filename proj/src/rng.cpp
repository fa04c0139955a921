// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#include "rep/rng.hpp"

#include <cmath>

#include "rep/errors.hpp"

namespace rep {

uint64_t fnv1a64(std::string_view s) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (const char c : s) {
        h ^= static_cast<uint8_t>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

NoiseType parse_noise_type(std::string_view s) {
    if (s == "gaussian") return NoiseType::gaussian;
    if (s == "uniform") return NoiseType::uniform;
    if (s == "laplace") return NoiseType::laplace;
    throw ConfigError("unknown noise type '" + std::string(s) +
                      "' (expected gaussian, uniform, or laplace)");
}

std::string to_string(NoiseType t) {
    switch (t) {
        case NoiseType::gaussian: return "gaussian";
        case NoiseType::uniform: return "uniform";
        case NoiseType::laplace: return "laplace";
    }
    return "gaussian";
}

Rng::Rng(uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

Rng Rng::substream(std::string_view name) const {
    return Rng(splitmix64(seed_ ^ fnv1a64(name)));
}

Rng Rng::substream(uint64_t index) const {
    return Rng(splitmix64(seed_ ^ (0x9e3779b97f4a7c15ull * (index + 1))));
}

double Rng::uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

double Rng::normal() {
    // Box-Muller without spare caching: two uniforms per draw keeps the
    // stream position independent of call history.
    double u1 = uniform01();
    while (u1 == 0.0) u1 = uniform01();
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
}

double Rng::noise(NoiseType t) {
    switch (t) {
        case NoiseType::gaussian:
            return normal();
        case NoiseType::uniform:
            // U(-sqrt(3), sqrt(3)) has unit variance.
            return uniform(-1.7320508075688772935, 1.7320508075688772935);
        case NoiseType::laplace: {
            // Inverse CDF; scale 1/sqrt(2) gives unit variance.
            const double u = uniform01() - 0.5;
            const double b = 0.7071067811865475244;
            const double a = std::abs(u);
            return (u < 0.0 ? b : -b) * std::log(1.0 - 2.0 * a);
        }
    }
    return 0.0;
}

int64_t Rng::uniform_int(int64_t n) {
    if (n <= 0) throw Error("Rng::uniform_int: n must be positive");
    const auto un = static_cast<uint64_t>(n);
    const uint64_t limit = UINT64_MAX - UINT64_MAX % un;
    uint64_t r = engine_();
    while (r >= limit) r = engine_();
    return static_cast<int64_t>(r % un);
}

}  // namespace rep
