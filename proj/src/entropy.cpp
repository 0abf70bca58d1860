#include "entropytest/entropy.hpp"

#include <cmath>
#include <string>
#include <vector>

#include "entropytest/error.hpp"

namespace entropytest {

namespace {

constexpr std::uint64_t kEnumerationLimit = std::uint64_t{1} << 20;

void guard_enumeration(std::size_t n, std::size_t k) {
    const auto words = checked_power(n, k);
    if (!words || *words > kEnumerationLimit)
        throw CapacityError("enumerating " + std::to_string(n) + "^" + std::to_string(k) +
                            " contexts exceeds the 2^20 guard");
}

// Sum over contexts of sum_a nu(va) log2(nu(va) / nu-bar(v)); nonpositive.
double context_log_likelihood(const Sequence& seq, std::size_t k) {
    if (k >= seq.size())
        throw ArgumentError("order " + std::to_string(k) + " must be below the sample length " +
                            std::to_string(seq.size()));
    const NGramCounts counts(seq, k + 1);
    const auto n = counts.alphabet_size();

    double total = 0.0;
    std::vector<std::uint64_t> group;
    WordKey current = 0;
    bool open = false;
    auto flush = [&] {
        std::uint64_t bar = 0;
        for (auto c : group) bar += c;
        const auto denom = static_cast<double>(bar);
        for (auto c : group) total += static_cast<double>(c) * std::log2(static_cast<double>(c) / denom);
        group.clear();
    };
    counts.for_each([&](WordKey word, std::uint64_t c) {
        const WordKey context = word / n;
        if (open && context != current) flush();
        current = context;
        open = true;
        group.push_back(c);
    });
    if (open) flush();
    return total;
}

double markov_conditional_entropy(const SourceModel& source, const MarkovParams& m, std::size_t k) {
    const auto n = source.alphabet().size();
    const auto pi = stationary_distribution(source);
    const auto& P = m.transitions;
    if (k >= m.order) {
        double h = 0.0;
        for (std::size_t u = 0; u < pi.size(); ++u)
            h += pi[u] * shannon_entropy(std::span<const double>(P).subspan(u * n, n));
        return h;
    }
    guard_enumeration(n, k);
    // Joint law of (last k letters of a stationary m-window, next letter).
    const auto contexts = *checked_power(n, k);
    std::vector<double> joint(contexts * n, 0.0);
    for (std::size_t u = 0; u < pi.size(); ++u) {
        const auto w = u % contexts;
        for (std::size_t a = 0; a < n; ++a) joint[w * n + a] += pi[u] * P[u * n + a];
    }
    double h = 0.0;
    for (std::size_t w = 0; w < contexts; ++w) {
        double mass = 0.0;
        for (std::size_t a = 0; a < n; ++a) mass += joint[w * n + a];
        if (mass <= 0.0) continue;
        for (std::size_t a = 0; a < n; ++a) {
            const double q = joint[w * n + a];
            if (q > 0.0) h -= q * std::log2(q / mass);
        }
    }
    return h;
}

// Depth-first walk over A^k carrying the predictive hidden-state law. Returns
// sum_w p(w) H(next | w) for the walk started from `start`.
class HiddenWalk {
public:
    HiddenWalk(const HiddenMarkovParams& p, std::size_t n, std::size_t depth)
        : p_(p), n_(n), depth_(depth), layers_(depth + 1, std::vector<double>(p.states)), next_(n) {}

    double run(std::span<const double> start) {
        std::copy(start.begin(), start.end(), layers_[0].begin());
        return visit(0, 1.0);
    }

private:
    double visit(std::size_t d, double mass) {
        const auto S = p_.states;
        const auto& phi = layers_[d];
        for (std::size_t a = 0; a < n_; ++a) {
            double s = 0.0;
            for (std::size_t h = 0; h < S; ++h) s += phi[h] * p_.emission[h * n_ + a];
            next_[a] = s;
        }
        if (d == depth_) return mass * shannon_entropy(next_);
        const std::vector<double> letters = next_;
        double acc = 0.0;
        for (std::size_t a = 0; a < n_; ++a) {
            if (letters[a] <= 0.0) continue;
            auto& out = layers_[d + 1];
            std::fill(out.begin(), out.end(), 0.0);
            for (std::size_t h = 0; h < S; ++h) {
                const double w = phi[h] * p_.emission[h * n_ + a] / letters[a];
                if (w == 0.0) continue;
                for (std::size_t g = 0; g < S; ++g) out[g] += w * p_.transition[h * S + g];
            }
            acc += visit(d + 1, mass * letters[a]);
        }
        return acc;
    }

    const HiddenMarkovParams& p_;
    std::size_t n_;
    std::size_t depth_;
    std::vector<std::vector<double>> layers_;
    std::vector<double> next_;
};

}  // namespace

double shannon_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double x : p)
        if (x > 0.0) h -= x * std::log2(x);
    return h;
}

double empirical_entropy(const Sequence& seq, std::size_t k) {
    const double ll = context_log_likelihood(seq, k);
    return ll == 0.0 ? 0.0 : -ll / static_cast<double>(seq.size() - k);
}

double max_markov_log_prob(const Sequence& seq, std::size_t m) { return context_log_likelihood(seq, m); }

double conditional_entropy(const SourceModel& source, std::size_t k) {
    const auto n = source.alphabet().size();
    if (const auto* b = std::get_if<BernoulliParams>(&source.params())) return shannon_entropy(b->probabilities);
    if (const auto* m = std::get_if<MarkovParams>(&source.params()))
        return markov_conditional_entropy(source, *m, k);
    const auto& h = std::get<HiddenMarkovParams>(source.params());
    guard_enumeration(n, k);
    const auto psi = hidden_stationary_distribution(source);
    HiddenWalk walk(h, n, k);
    return walk.run(psi);
}

double limit_entropy(const SourceModel& source) {
    const auto order = source.order();
    if (!order)
        throw UnsupportedError("hidden-Markov entropy rate has no closed form; use entropy_rate_bracket");
    return conditional_entropy(source, *order);
}

EntropyBracket entropy_rate_bracket(const SourceModel& source, std::size_t k) {
    if (source.order()) return {limit_entropy(source), conditional_entropy(source, k)};
    const auto& h = std::get<HiddenMarkovParams>(source.params());
    const auto n = source.alphabet().size();
    guard_enumeration(n, k);
    const auto psi = hidden_stationary_distribution(source);
    HiddenWalk walk(h, n, k);
    double lower = 0.0;
    std::vector<double> point(h.states, 0.0);
    for (std::size_t s = 0; s < h.states; ++s) {
        if (psi[s] <= 0.0) continue;
        std::fill(point.begin(), point.end(), 0.0);
        point[s] = 1.0;
        lower += psi[s] * walk.run(point);
    }
    return {lower, walk.run(psi)};
}

}  // namespace entropytest
