#pragma once

// Seeded random streams.
//
// Every consumer of randomness derives its own stream from a base seed and a
// (tag, index) pair, so adding a new consumer never shifts the draws seen by
// an existing one.

#include <cmath>
#include <cstdint>
#include <random>

namespace cshift {

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Mix a base seed with a stream tag and an index into an independent seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag,
                                 std::uint64_t index = 0) noexcept {
    return splitmix64(splitmix64(splitmix64(seed) ^ (tag * 0xD1B54A32D192ED03ULL)) ^ index);
}

namespace stream {
// Tags used by the test engine and the simulation lab.
inline constexpr std::uint64_t split = 1;
inline constexpr std::uint64_t zeta = 2;
inline constexpr std::uint64_t marginal_fit = 3;
inline constexpr std::uint64_t joint_fit = 4;
inline constexpr std::uint64_t rank_tie = 5;
inline constexpr std::uint64_t shuffle = 6;
inline constexpr std::uint64_t generate_train = 10;
inline constexpr std::uint64_t generate_test = 11;
inline constexpr std::uint64_t holdout = 12;
inline constexpr std::uint64_t coefficients = 13;
inline constexpr std::uint64_t resample = 14;
inline constexpr std::uint64_t replication = 15;
}  // namespace stream

class Rng {
public:
    using result_type = std::mt19937_64::result_type;

    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}
    Rng(std::uint64_t seed, std::uint64_t tag, std::uint64_t index = 0)
        : engine_(derive_seed(seed, tag, index)) {}

    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return engine_(); }

    /// Uniform on [0, 1) with 53 random bits; never returns 1.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double normal() { return normal_(engine_); }
    double normal(double mean, double sd) { return mean + sd * normal_(engine_); }

    double student_t(double dof) { return std::student_t_distribution<double>(dof)(engine_); }

    /// Uniform integer on [lo, hi].
    std::uint64_t integer(std::uint64_t lo, std::uint64_t hi) {
        return std::uniform_int_distribution<std::uint64_t>(lo, hi)(engine_);
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace cshift
