#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace tbdtrack {

/// All randomness in the library flows through explicitly seeded engines.
/// Substreams are derived by mixing a master seed with an id path
/// (e.g. {run, step, stage}), so parallel schedules cannot change results.
using RandomEngine = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derive a child seed from a master seed and an id path.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t s = splitmix64(master);
    for (std::uint64_t id : path) {
        s = splitmix64(s ^ splitmix64(id + 0x632be59bd9b4e019ULL));
    }
    return s;
}

inline RandomEngine make_engine(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    return RandomEngine(derive_seed(master, path));
}

/// Rayleigh sample with the given scale. Never returns an exact zero so that
/// downstream densities stay well defined.
inline double sample_rayleigh(double scale, RandomEngine& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    double u = unif(rng);
    while (u <= 0.0) u = unif(rng);
    return scale * std::sqrt(-2.0 * std::log(u));
}

} // namespace tbdtrack
