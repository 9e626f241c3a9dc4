#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace meca {

// Seeded PRNG shared by every stochastic step of a run. Streams for separate
// stages are derived with fork() so adding draws in one stage does not shift
// another stage's sequence.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    [[nodiscard]] std::uint64_t seed() const { return seed_; }

    // Independent stream keyed by (seed, tag).
    [[nodiscard]] Rng fork(std::string_view tag) const;

    double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
    double normal(double mean, double stddev) { return std::normal_distribution<double>(mean, stddev)(engine_); }
    // Uniform integer in [0, n).
    std::size_t index(std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(engine_); }

    template <class T>
    void shuffle(std::vector<T>& v) {
        // Fisher-Yates over our own index draws; std::shuffle's algorithm is unspecified.
        for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[index(i)]);
    }

    std::vector<std::size_t> permutation(std::size_t n);

    std::mt19937_64& engine() { return engine_; }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace meca
