#pragma once

#include <cstdint>

#include "hybridmv/normal.hpp"

namespace hybridmv::rng {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based stream: every draw is a pure function of (seed, path, step, lane),
// so results do not depend on the order in which paths are processed.
inline std::uint64_t key(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t lane) {
    std::uint64_t h = mix64(seed);
    h = mix64(h ^ path);
    h = mix64(h ^ (step * 0x100000001b3ULL + lane));
    return h;
}

// Uniform on the open interval (0,1).
inline double uniform(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t lane) {
    return (static_cast<double>(key(seed, path, step, lane) >> 11) + 0.5) * 0x1.0p-53;
}

inline double gaussian(std::uint64_t seed, std::uint64_t path, std::uint64_t step, std::uint64_t lane) {
    return normal::quantile(uniform(seed, path, step, lane));
}

}  // namespace hybridmv::rng
