#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "entropytest/hypothesis_test.hpp"
#include "entropytest/sources.hpp"

namespace entropytest {

enum class Hypothesis { Null, Alternative };

/// One Monte Carlo experiment: sample N sequences from `source` at each length
/// and count how often the configured test rejects.
struct ExperimentSpec {
    Hypothesis hypothesis = Hypothesis::Null;
    SourceModel source;
    std::size_t order = 0;
    double alpha = 0.05;
    /// Measure spec or `code:<command>`; see parse_evidence.
    std::string evidence = "mixture";
    std::vector<std::size_t> lengths;
    std::size_t trials = 1;
    std::uint64_t seed = 0;

    /// Structural checks: trials >= 1, lengths strictly increasing and > order,
    /// alpha in (0,1), evidence parses. Throws SpecError.
    void validate() const;

    nlohmann::json to_json() const;
    /// Reads {"hypothesis": "H0"|"H1", "source": {...} | "source_file": path,
    /// "order", "alpha", "measure", "lengths", "trials", "seed"}. Relative
    /// source_file paths resolve against `base_dir`.
    static ExperimentSpec from_json(const nlohmann::json& doc, const std::string& base_dir = ".");
};

struct BinomialInterval {
    double lower;
    double upper;
};

/// Exact two-sided Clopper-Pearson interval for k successes in n trials.
BinomialInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence = 0.95);

/// Smallest k with P(Binomial(n, p) <= k) >= q.
std::uint64_t binomial_quantile(std::uint64_t trials, double p, double q);

struct CellResult {
    std::size_t t = 0;
    std::uint64_t trials = 0;
    std::uint64_t rejections = 0;
    double rate = 0.0;
    BinomialInterval ci95{0.0, 1.0};
    /// H0 cells: rejections allowed by the Binomial(N, alpha) 99.9% quantile.
    std::optional<std::uint64_t> type1_limit;
};

struct MonteCarloReport {
    ExperimentSpec spec;
    std::vector<CellResult> cells;
    double wall_seconds = 0.0;

    /// True unless some H0 cell rejects more often than its type1_limit.
    bool type1_within_bound() const;

    /// Deterministic for a given spec; wall time is added only on request.
    nlohmann::json to_json(bool include_timing = false) const;
    /// `t,trials,rejections,rate,lo95,hi95`, one row per length.
    std::string to_csv() const;
};

/// Runs every (length, trial) cell. Trial i at length index c draws from
/// SeededRng(seed, c << 32 | i), so results do not depend on `threads`.
MonteCarloReport run_experiment(const ExperimentSpec& spec, std::size_t threads = 1);

/// Requires an H0 spec whose source has order <= spec.order.
MonteCarloReport estimate_type1(const ExperimentSpec& spec, std::size_t threads = 1);

/// Requires an H1 spec whose source has order > spec.order or is hidden-Markov.
MonteCarloReport estimate_power(const ExperimentSpec& spec, std::size_t threads = 1);

/// Worker count from ENTROPYTEST_THREADS, else hardware concurrency.
std::size_t thread_count_from_env();

struct CheckResult {
    std::string group;
    bool passed = false;
    std::uint64_t checked = 0;
    nlohmann::json details;
};

/// Names accepted by verify_suite.
std::vector<std::string> verify_groups();

/// Runs the named invariant groups (all of them when `groups` is empty).
/// Unknown names throw ArgumentError.
std::vector<CheckResult> verify_suite(std::span<const std::string> groups, std::uint64_t seed = 20240101);

nlohmann::json to_json(const CheckResult& result);

}  // namespace entropytest
