#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace entropytest {

/// Deterministic random stream addressed by (seed, stream).
///
/// Distinct streams under one seed are seeded through std::seed_seq, so
/// parallel trials keyed by trial index draw reproducible, unrelated paths.
class SeededRng {
public:
    SeededRng(std::uint64_t seed, std::uint64_t stream);

    std::uint64_t seed() const noexcept { return seed_; }
    std::uint64_t stream() const noexcept { return stream_; }

    std::uint64_t next() { return engine_(); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Index drawn from a probability vector by inverse CDF.
    std::size_t categorical(std::span<const double> probabilities);

    /// Uniform draw from the probability simplex on n points (Dirichlet(1)).
    std::vector<double> simplex(std::size_t n);

private:
    std::uint64_t seed_;
    std::uint64_t stream_;
    std::mt19937_64 engine_;
};

}  // namespace entropytest
