#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "entropytest/rng.hpp"
#include "entropytest/sequence.hpp"

namespace entropytest {

/// i.i.d. letters with a fixed distribution (the class M_0).
struct BernoulliParams {
    std::vector<double> probabilities;
};

/// Order-k Markov source. `transitions` is row-major: row `u` (a context word
/// key over A^k) holds P(. | u). `initial` is the law of x_1 ... x_k indexed
/// by word key.
struct MarkovParams {
    std::size_t order = 0;
    std::vector<double> transitions;
    std::vector<double> initial;
};

/// Hidden chain over `states` states emitting letters; row-major matrices.
struct HiddenMarkovParams {
    std::size_t states = 0;
    std::vector<double> transition;
    std::vector<double> emission;
    std::vector<double> initial;
};

using SourceParams = std::variant<BernoulliParams, MarkovParams, HiddenMarkovParams>;

/// Incremental conditional law p(. | x_1 ... x_i) of a source.
class SourceTracker {
public:
    virtual ~SourceTracker() = default;

    /// Writes p(a | history) for every letter a; `out` has n entries.
    virtual void distribution(std::span<double> out) const = 0;
    virtual double probability(Symbol a) const = 0;
    virtual void update(Symbol a) = 0;
    virtual std::unique_ptr<SourceTracker> clone() const = 0;
};

/// Exact generative model over a finite alphabet. Immutable and cheap to copy.
class SourceModel {
public:
    static SourceModel bernoulli(Alphabet alphabet, std::vector<double> probabilities);

    /// `initial` empty selects the stationary start (the chain must then be
    /// irreducible and aperiodic).
    static SourceModel markov(Alphabet alphabet, std::size_t order, std::vector<double> transitions,
                              std::vector<double> initial = {});

    /// `initial` empty selects the stationary law of the hidden chain.
    static SourceModel hidden_markov(Alphabet alphabet, std::size_t states,
                                     std::vector<double> transition, std::vector<double> emission,
                                     std::vector<double> initial = {});

    const Alphabet& alphabet() const noexcept;
    const SourceParams& params() const noexcept;

    bool is_bernoulli() const noexcept;
    bool is_markov() const noexcept;
    bool is_hidden_markov() const noexcept;

    /// Memory of the source; nullopt for hidden-Markov sources.
    std::optional<std::size_t> order() const noexcept;

    /// False when an explicit initial law differs from the stationary one.
    bool stationary_start() const noexcept;

    /// Same law as a Markov model of order `k`. Requires k >= order().
    SourceModel as_markov(std::size_t k) const;

    std::unique_ptr<SourceTracker> tracker() const;

    nlohmann::json to_json() const;

private:
    struct Impl;
    explicit SourceModel(std::shared_ptr<const Impl> impl);
    std::shared_ptr<const Impl> impl_;
};

/// Draws x_1 ... x_t. Reproducible for a given (seed, stream).
Sequence sample(const SourceModel& source, std::size_t t, SeededRng& rng);

/// log2 p(x_1 ... x_t); -infinity marks a zero-probability path.
double log_probability(const SourceModel& source, const Sequence& seq);
double log_probability(const SourceModel& source, std::span<const Symbol> word);

inline bool is_impossible(double log_prob) noexcept { return log_prob == -std::numeric_limits<double>::infinity(); }

/// Fixed point of the word chain on A^k induced by a Markov (or Bernoulli,
/// k = 0) source. Throws ModelError for reducible or periodic chains.
std::vector<double> stationary_distribution(const SourceModel& source);

/// Stationary law of the hidden chain of a hidden-Markov source.
std::vector<double> hidden_stationary_distribution(const SourceModel& source);

/// Stationary law of a row-stochastic matrix on `states` states.
/// Power iteration to total-variation residual 1e-12, at most 1e6 sweeps.
std::vector<double> stationary_of_matrix(std::size_t states, std::span<const double> matrix);

/// Parses a source document:
///   {"variant": "bernoulli", "alphabet": "binary", "probabilities": [...]}
///   {"variant": "markov", "alphabet": ..., "order": k,
///    "transitions": {"<context>": [...], ...} or [[...], ...], "initial": optional}
///   {"variant": "hidden_markov", "alphabet": ..., "states": s,
///    "transition": [[...]], "emission": [[...]], "initial": optional}
/// Rows must sum to 1 within 1e-9 and are renormalised.
SourceModel source_from_json(const nlohmann::json& doc);
SourceModel read_source_file(const std::filesystem::path& path);

}  // namespace entropytest
