#include "entropytest/rng.hpp"

#include <cmath>

namespace entropytest {

namespace {

std::mt19937_64 make_engine(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return std::mt19937_64(seq);
}

}  // namespace

SeededRng::SeededRng(std::uint64_t seed, std::uint64_t stream)
    : seed_(seed), stream_(stream), engine_(make_engine(seed, stream)) {}

std::size_t SeededRng::categorical(std::span<const double> probabilities) {
    const double u = uniform();
    double acc = 0.0;
    std::size_t last_positive = 0;
    for (std::size_t i = 0; i < probabilities.size(); ++i) {
        if (probabilities[i] <= 0.0) continue;
        acc += probabilities[i];
        last_positive = i;
        if (u < acc) return i;
    }
    // rounding left acc slightly below 1
    return last_positive;
}

std::vector<double> SeededRng::simplex(std::size_t n) {
    std::vector<double> p(n);
    double sum = 0.0;
    for (auto& x : p) {
        x = -std::log1p(-uniform());
        sum += x;
    }
    for (auto& x : p) x /= sum;
    return p;
}

}  // namespace entropytest
