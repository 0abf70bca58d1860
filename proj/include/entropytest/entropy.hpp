#pragma once

#include <cstddef>
#include <span>

#include "entropytest/sequence.hpp"
#include "entropytest/sources.hpp"

namespace entropytest {

/// Shannon entropy of a distribution in bits, with 0 log 0 = 0.
double shannon_entropy(std::span<const double> p);

/// Empirical conditional entropy h*_k of a sample in bits per symbol:
///
///   h*_k = -1/(t-k) * sum_{v in A^k} sum_{a in A} nu(va) log2(nu(va) / nu-bar(v))
///
/// where nu counts overlapping (k+1)-windows and nu-bar(v) sums nu(va) over a.
/// Requires k < t.
double empirical_entropy(const Sequence& seq, std::size_t k);

/// log2 of the largest probability any order-m Markov source assigns to the
/// sample (ignoring the initial m letters): -(t-m) h*_m, summed directly from
/// the counts rather than multiplied back out.
double max_markov_log_prob(const Sequence& seq, std::size_t m);

/// Conditional entropy h_k(p) of the stationary law: the expected entropy of
/// the next letter given the k previous ones.
double conditional_entropy(const SourceModel& source, std::size_t k);

/// Entropy rate h_inf. Exact for Bernoulli and Markov sources; hidden-Markov
/// sources raise UnsupportedError (use entropy_rate_bracket).
double limit_entropy(const SourceModel& source);

struct EntropyBracket {
    double lower;
    double upper;
};

/// Bounds on h_inf from k letters of context:
/// H(X_{k+1} | X_1..X_k, S_1) <= h_inf <= H(X_{k+1} | X_1..X_k),
/// S_1 the initial hidden state. Markov sources return their exact rate as
/// the lower end.
EntropyBracket entropy_rate_bracket(const SourceModel& source, std::size_t k);

}  // namespace entropytest
