#pragma once

// Self-contained RNG and low-discrepancy sequences. std::<random> distributions
// are not bit-identical across standard libraries, so everything that feeds a
// reproducibility contract is implemented here.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

#include "borda/errors.hpp"

namespace borda {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9e3779b97f4a7c15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// FNV-1a over a string tag, used to derive named substreams from one seed.
inline std::uint64_t hash_tag(std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : tag) {
        h ^= static_cast<std::uint64_t>(static_cast<unsigned char>(c));
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// xoshiro256++ with splitmix64 seeding. Value-semantic and copyable; copies
/// continue the stream independently.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) {
        std::uint64_t sm = seed;
        for (auto& word : state_) word = detail::splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform index in [0, n). n must be positive.
    std::size_t uniform_index(std::size_t n) {
        if (n == 0) throw ConfigError("uniform_index: n must be positive");
        return static_cast<std::size_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    /// Standard normal via Box-Muller (second draw cached).
    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        // u1 in (0, 1] so the log is finite.
        const double u1 = (static_cast<double>(next_u64() >> 11) + 1.0) * 0x1.0p-53;
        const double u2 = uniform();
        const double radius = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        spare_ = radius * std::sin(angle);
        have_spare_ = true;
        return radius * std::cos(angle);
    }

    int bernoulli(double p) { return uniform() < p ? 1 : 0; }

    /// Derive an independent named substream without consuming this stream.
    [[nodiscard]] Rng child(std::string_view tag) const {
        std::uint64_t sm = state_[0] ^ detail::hash_tag(tag);
        return Rng(detail::splitmix64(sm));
    }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double spare_ = 0.0;
    bool have_spare_ = false;
};

/// Seed for a named substream of a trial, e.g. trial_seed(7, "warmup").
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t sm = seed ^ detail::hash_tag(tag);
    return detail::splitmix64(sm);
}

namespace detail {

inline constexpr std::array<int, 25> kHaltonPrimes = {2,  3,  5,  7,  11, 13, 17, 19, 23,
                                                      29, 31, 37, 41, 43, 47, 53, 59, 61,
                                                      67, 71, 73, 79, 83, 89, 97};

inline double radical_inverse(std::uint64_t index, int base) {
    double inv_base = 1.0 / base;
    double factor = inv_base;
    double result = 0.0;
    while (index > 0) {
        result += static_cast<double>(index % static_cast<std::uint64_t>(base)) * factor;
        index /= static_cast<std::uint64_t>(base);
        factor *= inv_base;
    }
    return result;
}

}  // namespace detail

/// Halton low-discrepancy points in [0,1)^dim, one point per row. The sequence
/// is deterministic; indices start at 1 to skip the origin.
inline Eigen::MatrixXd halton_points(int count, int dim) {
    if (count < 0 || dim < 0) throw ConfigError("halton_points: negative count or dim");
    if (dim > static_cast<int>(detail::kHaltonPrimes.size()))
        throw ConfigError("halton_points: dimension exceeds supported maximum of 25");
    Eigen::MatrixXd points(count, dim);
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < dim; ++j)
            points(i, j) = detail::radical_inverse(static_cast<std::uint64_t>(i) + 1,
                                                   detail::kHaltonPrimes[static_cast<std::size_t>(j)]);
    return points;
}

/// i.i.d. uniform points in [0,1)^dim, one per row.
inline Eigen::MatrixXd uniform_points(int count, int dim, Rng& rng) {
    Eigen::MatrixXd points(count, dim);
    for (int i = 0; i < count; ++i)
        for (int j = 0; j < dim; ++j) points(i, j) = rng.uniform();
    return points;
}

}  // namespace borda
