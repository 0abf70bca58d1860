#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "entropytest/sequence.hpp"
#include "entropytest/sources.hpp"

namespace entropytest {

/// Incremental evaluator of a sequential measure. Owns mutable count state:
/// one owner at a time, clone() for independent copies.
class Predictor {
public:
    virtual ~Predictor() = default;

    /// sigma(a | history)
    virtual double probability(Symbol a) const = 0;
    /// sigma(. | history) for every letter; `out` has n entries.
    virtual void distribution(std::span<double> out) const;
    virtual void update(Symbol a) = 0;
    /// log2 sigma(a | history), then appends a to the history.
    virtual double consume(Symbol a);
    virtual std::unique_ptr<Predictor> clone() const = 0;

    std::size_t alphabet_size() const noexcept { return n_; }

protected:
    explicit Predictor(std::size_t n) : n_(n) {}

private:
    std::size_t n_;
};

/// A next-symbol probability assignment for every finite history, inducing
/// sigma(x_1..x_t) = prod_i sigma(x_i | x_1..x_{i-1}). Immutable; shareable
/// across threads.
class SequentialMeasure {
public:
    virtual ~SequentialMeasure() = default;

    /// Spec-grammar name, e.g. "kt:2".
    virtual std::string name() const = 0;
    virtual std::size_t alphabet_size() const = 0;
    /// Fresh evaluator positioned at the empty history.
    virtual std::unique_ptr<Predictor> predictor() const = 0;
};

using MeasurePtr = std::shared_ptr<const SequentialMeasure>;

/// sigma(a | .) = 1/n.
MeasurePtr uniform_measure(std::size_t alphabet_size);

/// Laplace rule: (nu(a) + 1) / (t + n).
MeasurePtr laplace_measure(std::size_t alphabet_size);

/// Order-k add-1/2 estimator: (nu(ua) + 1/2) / (nu-bar(u) + n/2) with u the
/// last k letters. Histories shorter than k use order = history length, which
/// has no completed windows and therefore predicts 1/n.
MeasurePtr kt_measure(std::size_t alphabet_size, std::size_t order);

/// Bayesian mixture sigma(x) = sum_j w_j sigma_j(x). Weights must be positive
/// and sum to 1 within 1e-12.
MeasurePtr mixture_measure(std::vector<MeasurePtr> components, std::vector<double> weights);

/// Mixture of kt orders 0..K with w_k = 1/((k+1)(k+2)) for k < K and the
/// remaining 1/(K+1) on k = K.
MeasurePtr universal_measure(std::size_t alphabet_size, std::size_t max_order);

/// Default K for universal_measure: 8 for binary, 3 for bytes, otherwise the
/// largest order <= 8 whose dense count table stays within 2^24 entries.
std::size_t default_max_order(std::size_t alphabet_size);

/// Parses `uniform`, `laplace`, `kt:<k>` or `mixture[:K]`. A bare `mixture`
/// uses `default_mixture_order`.
MeasurePtr parse_measure(std::string_view spec, std::size_t alphabet_size, std::size_t default_mixture_order);

/// log2 sigma(x_1..x_t) in bits. Throws std::logic_error if the measure ever
/// assigns a nonpositive probability.
double log_measure(const SequentialMeasure& measure, std::span<const Symbol> seq);
double log_measure(const SequentialMeasure& measure, const Sequence& seq);

/// Kullback-Leibler divergence D(p || q) in bits. Throws ArgumentError when p
/// or q is not a distribution or q vanishes where p does not.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// Per-step prediction error: D(p(. | history) || sigma(. | history)).
double step_error(const SourceModel& source, const SequentialMeasure& measure, std::span<const Symbol> history);

/// Per-symbol log-loss gap of one sample: (log2 p(x) - log2 sigma(x)) / t.
double per_symbol_error(const SourceModel& source, const SequentialMeasure& measure, const Sequence& seq);

/// rho^t for t = 0 .. t_max: the expectation over x in A^t of the step-(t+1)
/// divergence, by exhaustive enumeration (guard n^t_max <= 2^20).
std::vector<double> expected_step_errors(const SourceModel& source, const SequentialMeasure& measure,
                                         std::size_t t_max);
double expected_step_error(const SourceModel& source, const SequentialMeasure& measure, std::size_t t);

/// (1/t) sum_{x in A^t} p(x) log2(p(x) / sigma(x)), by enumeration.
double cumulative_error(const SourceModel& source, const SequentialMeasure& measure, std::size_t t);

struct PredictionError {
    double per_step;         // divergence of the next-step prediction after the sample
    double per_symbol_rate;  // log-loss gap of the sample per symbol
    std::optional<double> averaged;  // expected gap at this length, when enumerable
};

PredictionError prediction_error(const SourceModel& source, const SequentialMeasure& measure, const Sequence& seq);

}  // namespace entropytest
