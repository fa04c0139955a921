// Copyright 2026 the repkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rep {

enum class NoiseType { gaussian, uniform, laplace };

NoiseType parse_noise_type(std::string_view s);
std::string to_string(NoiseType t);

// Deterministic RNG with named substreams. Every random choice in the
// pipeline flows from one root seed: substreams are derived from the
// construction seed (not the draw position), so consuming one stream never
// shifts another.
class Rng {
public:
    explicit Rng(uint64_t seed);

    Rng substream(std::string_view name) const;
    Rng substream(uint64_t index) const;

    uint64_t seed() const { return seed_; }

    double uniform01();                    // [0, 1)
    double uniform(double lo, double hi);  // [lo, hi)
    double normal();                       // standard normal, Box-Muller
    // Unit-variance draw from the given family.
    double noise(NoiseType t);
    int64_t uniform_int(int64_t n);  // [0, n)

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (size_t i = v.size(); i > 1; --i) {
            const auto j = static_cast<size_t>(uniform_int(static_cast<int64_t>(i)));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    uint64_t seed_;
    std::mt19937_64 engine_;
};

uint64_t fnv1a64(std::string_view s);
uint64_t splitmix64(uint64_t x);

}  // namespace rep
