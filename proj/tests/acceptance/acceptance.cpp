// Acceptance suite: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "entropytest/codecs.hpp"
#include "entropytest/entropy.hpp"
#include "entropytest/harness.hpp"
#include "entropytest/hypothesis_test.hpp"
#include "entropytest/predictors.hpp"
#include "entropytest/rng.hpp"
#include "entropytest/sources.hpp"

using namespace entropytest;

namespace {

struct Verdict {
    bool passed;
    std::string detail;
};

struct Criterion {
    int id;
    std::string name;
    double budget_seconds;
    std::function<Verdict()> run;
};

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

const Alphabet& ternary() {
    static const Alphabet a = Alphabet::chars("012");
    return a;
}

SourceModel random_markov(SeededRng& rng, std::size_t order, const Alphabet& alphabet = Alphabet::binary()) {
    const auto n = alphabet.size();
    std::vector<double> rows;
    for (std::uint64_t c = 0; c < *checked_power(n, order); ++c) {
        const auto r = rng.simplex(n);
        rows.insert(rows.end(), r.begin(), r.end());
    }
    return SourceModel::markov(alphabet, order, std::move(rows));
}

Verdict exact_type1() {
    SeededRng rng(101, 0);
    const auto L = laplace_measure(2);
    double worst = 0.0;
    bool ok = true;
    std::string sizes;
    for (double alpha : {0.1, 0.5}) {
        std::vector<bool> critical(256);
        int size = 0;
        for (WordKey w = 0; w < 256; ++w) {
            critical[w] = run_predictor_test(Sequence(Alphabet::binary(), word_from_key(w, 2, 8)), 0, *L, alpha)
                              .decision == Decision::Reject;
            size += critical[w];
        }
        sizes += fmt("%s|C_%.1f| = %d", sizes.empty() ? "" : ", ", alpha, size);
        for (int s = 0; s < 50; ++s) {
            const auto src = SourceModel::bernoulli(Alphabet::binary(), rng.simplex(2));
            double mass = 0.0;
            for (WordKey w = 0; w < 256; ++w)
                if (critical[w]) mass += std::exp2(log_probability(src, word_from_key(w, 2, 8)));
            ok = ok && mass <= alpha + 1e-12;
            worst = std::max(worst, mass / alpha);
        }
    }
    return {ok, fmt("100 (source, alpha) pairs; %s of 256; max tau(C_alpha)/alpha = %.3g", sizes.c_str(), worst)};
}

Verdict mc_type1() {
    SeededRng rng(102, 0);
    const double limit = 0.05 + 3.0 * std::sqrt(0.05 * 0.95 / 2000.0);
    const auto threads = thread_count_from_env();
    const std::vector<std::pair<SourceModel, std::size_t>> cases{
        {SourceModel::bernoulli(Alphabet::binary(), {0.7, 0.3}), 0}, {random_markov(rng, 1), 1}};
    bool ok = true;
    std::string detail;
    for (const auto& [source, m] : cases) {
        const ExperimentSpec spec{.hypothesis = Hypothesis::Null,
                                  .source = source,
                                  .order = m,
                                  .alpha = 0.05,
                                  .evidence = "mixture",
                                  .lengths = {1000},
                                  .trials = 2000,
                                  .seed = 1020 + m};
        const auto cell = estimate_type1(spec, threads).cells.at(0);
        ok = ok && cell.rate <= limit;
        detail += fmt("%sm=%zu rate %.4f", detail.empty() ? "" : ", ", m, cell.rate);
    }
    return {ok, detail + fmt(" (limit %.4f)", limit)};
}

Verdict power() {
    const auto source = SourceModel::markov(Alphabet::binary(), 1, {0.9, 0.1, 0.1, 0.9});
    const auto threads = thread_count_from_env();
    ExperimentSpec spec{.hypothesis = Hypothesis::Alternative,
                        .source = source,
                        .order = 0,
                        .alpha = 0.05,
                        .evidence = "mixture",
                        .lengths = {2000},
                        .trials = 500,
                        .seed = 103};
    const double at2000 = estimate_power(spec, threads).cells.at(0).rate;
    spec.lengths = {50, 200, 1000, 5000};
    spec.seed = 1030;
    const auto trend = estimate_power(spec, threads);
    bool monotone = true;
    std::string rates;
    for (std::size_t i = 0; i < trend.cells.size(); ++i) {
        const auto& c = trend.cells[i];
        rates += fmt("%s%zu:%.3f", i ? " " : "", c.t, c.rate);
        if (i == 0) continue;
        const auto& p = trend.cells[i - 1];
        const double se = std::sqrt(p.rate * (1 - p.rate) / p.trials + c.rate * (1 - c.rate) / c.trials);
        monotone = monotone && c.rate >= p.rate - 2.0 * se;
    }
    return {at2000 >= 0.99 && monotone,
            fmt("rate at t=2000: %.3f; trend %s; nondecreasing within 2 SE: %s", at2000, rates.c_str(),
                monotone ? "yes" : "no")};
}

// Divergences are computed in bits. The cited bound is the classical one for
// KL in nats, so rho is converted before comparing; the bits reading is
// reported alongside.
Verdict laplace_bound() {
    SeededRng rng(104, 0);
    double worst_nats = 0.0, worst_bits = 0.0;
    bool ok = true;
    for (std::size_t n : {2, 3}) {
        const auto& alphabet = n == 2 ? Alphabet::binary() : ternary();
        const auto L = laplace_measure(n);
        for (int s = 0; s < 100; ++s) {
            const auto src = SourceModel::bernoulli(alphabet, rng.simplex(n));
            const auto rho = expected_step_errors(src, *L, 10);
            for (std::size_t t = 0; t < rho.size(); ++t) {
                const double bound = static_cast<double>(n - 1) / static_cast<double>(t + 1);
                const double r = rho[t] * std::numbers::ln2 / bound;
                ok = ok && r < 1.0;
                worst_nats = std::max(worst_nats, r);
                worst_bits = std::max(worst_bits, rho[t] / bound);
            }
        }
    }
    return {ok, fmt("max rho/bound %.4f in nats (margin %.4f); same ratio with rho in bits %.4f", worst_nats,
                    1.0 - worst_nats, worst_bits)};
}

Verdict markov_domination() {
    SeededRng rng(105, 0);
    double worst = -INFINITY;
    std::uint64_t pairs = 0;
    bool ok = true;
    for (std::size_t m = 0; m <= 2; ++m)
        for (int s = 0; s < 100; ++s) {
            const auto src = random_markov(rng, rng.next() % (m + 1));
            for (std::size_t t = m + 1; t <= 10; ++t)
                for (WordKey w = 0; w < (WordKey{1} << t); ++w) {
                    const Sequence x(Alphabet::binary(), word_from_key(w, 2, t));
                    const double gap = log_probability(src, x) - max_markov_log_prob(x, m);
                    ok = ok && gap <= 1e-12;
                    worst = std::max(worst, gap);
                    ++pairs;
                }
        }
    return {ok, fmt("%llu (tau, x) pairs; max log2 tau(x) + (t-m)h*_m(x) = %.3g",
                    static_cast<unsigned long long>(pairs), worst)};
}

Verdict code_measure() {
    SeededRng rng(106, 0);
    std::uint64_t words = 0;
    int tables = 0;
    bool ok = true;
    for (std::size_t n : {2, 3})
        for (std::size_t len = 1; len <= 3; ++len)
            for (int i = 0; i < 50; ++i, ++tables) {
                CodeLengthTable table(n, len);
                const auto size = *checked_power(n, len);
                std::vector<int> lengths(size);
                double kraft = 0.0;
                for (auto& l : lengths) {
                    l = 1 + static_cast<int>(rng.next() % 16);
                    kraft += std::ldexp(1.0, -l);
                }
                const int shift = kraft > 1.0 ? static_cast<int>(std::ceil(std::log2(kraft))) : 0;
                for (WordKey w = 0; w < size; ++w) table.set(w, lengths[w] + shift);
                const auto mu = code_to_measure(table);
                for (WordKey w = 0; w < size; ++w, ++words) ok = ok && -mu.log2_probability(w) <= *table.length(w);
            }
    return {ok, fmt("%d Kraft-feasible tables, %llu codewords; -log2 mu <= |phi| exactly", tables,
                    static_cast<unsigned long long>(words))};
}

Verdict normalization() {
    double worst = 0.0;
    int sums = 0;
    for (std::size_t n : {2, 3}) {
        const std::vector<MeasurePtr> measures{laplace_measure(n), kt_measure(n, 0), kt_measure(n, 1),
                                               kt_measure(n, 2), universal_measure(n, 2),
                                               universal_measure(n, default_max_order(n))};
        for (const auto& mu : measures)
            for (std::size_t t = 1; t <= 8; ++t, ++sums) {
                double total = 0.0;
                for (WordKey w = 0; w < *checked_power(n, t); ++w)
                    total += std::exp2(log_measure(*mu, word_from_key(w, n, t)));
                worst = std::max(worst, std::abs(total - 1.0));
            }
    }
    return {worst <= 1e-9, fmt("%d exhaustive sums; max |sum - 1| = %.3g", sums, worst)};
}

Verdict worked_values() {
    const auto L = laplace_measure(2);
    auto p = L->predictor();
    const auto hist = parse_sequence("01010", Alphabet::binary());
    for (Symbol s : hist.symbols()) p->update(s);
    const double l0 = p->probability(0), l1 = p->probability(1);
    const double l0101 = std::exp2(log_measure(*L, parse_sequence("0101", Alphabet::binary())));
    const auto nu = word_counts(parse_sequence("000100", Alphabet::binary()), 2).count(WordKey{0});
    const bool ok = std::abs(l0 - 4.0 / 7) <= 1e-12 && std::abs(l1 - 3.0 / 7) <= 1e-12 &&
                    std::abs(l0101 - 1.0 / 30) <= 1e-12 && nu == 3;
    return {ok, fmt("L(0|01010)=%.15f L(1|01010)=%.15f L(0101)=%.15f nu6(00)=%llu", l0, l1, l0101,
                    static_cast<unsigned long long>(nu))};
}

Verdict universality() {
    SeededRng rng(109, 0);
    const auto mix = universal_measure(2, default_max_order(2));
    constexpr std::size_t t = 100000;
    int code_ok = 0, emp_ok = 0;
    double worst_code = 0.0, worst_emp = 0.0;
    for (int s = 0; s < 20; ++s) {
        const auto src = random_markov(rng, 2);
        SeededRng srng(109, 1 + s);
        const auto x = sample(src, t, srng);
        const double h = limit_entropy(src);
        const double code_gap = std::abs(-log_measure(*mix, x) / t - h);
        const double emp_gap = std::abs(empirical_entropy(x, 2) - conditional_entropy(src, 2));
        code_ok += code_gap <= 0.05;
        emp_ok += emp_gap <= 0.01;
        worst_code = std::max(worst_code, code_gap);
        worst_emp = std::max(worst_emp, emp_gap);
    }
    return {code_ok >= 19 && emp_ok >= 19,
            fmt("mixture rate within 0.05 in %d/20 (max gap %.4f); h*_2 within 0.01 in %d/20 (max gap %.4f)",
                code_ok, worst_code, emp_ok, worst_emp)};
}

Verdict code_based() {
    const ExternalCodec gz{"gzip -c -n -9"};
    std::vector<Symbol> rep(100000);
    for (std::size_t i = 0; i < rep.size(); ++i) rep[i] = static_cast<Symbol>(i % 2);
    const auto structured = run_code_test(Sequence(Alphabet::binary(), rep), 0, gz, 0.01);
    SeededRng rng(110, 0);
    const auto noise = sample(SourceModel::bernoulli(Alphabet::binary(), {0.5, 0.5}), 10000, rng);
    const auto random = run_code_test(noise, 0, gz, 0.01);
    return {structured.decision == Decision::Reject && random.decision == Decision::Accept,
            fmt("gzip: \"01\"x50000 %s (statistic %.1f bits); Bernoulli(1/2) t=10^4 %s (statistic %.1f bits)",
                to_string(structured.decision).c_str(), structured.statistic_bits,
                to_string(random.decision).c_str(), random.statistic_bits)};
}

}  // namespace

int main() {
    const std::vector<Criterion> criteria{
        {1, "exact type I enumeration", 5, exact_type1},
        {2, "Monte Carlo type I", 120, mc_type1},
        {3, "power", 180, power},
        {4, "Laplace error bound", 30, laplace_bound},
        {5, "Markov likelihood domination", 60, markov_domination},
        {6, "code-induced measure domination", 5, code_measure},
        {7, "measure normalisation", 30, normalization},
        {8, "worked values", 1, worked_values},
        {9, "universality surrogate", 120, universality},
        {10, "code-based test end to end", 30, code_based},
    };
    int failures = 0;
    for (const auto& c : criteria) {
        const auto start = std::chrono::steady_clock::now();
        Verdict v{false, ""};
        try {
            v = c.run();
        } catch (const std::exception& e) {
            v = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        const bool in_time = secs < c.budget_seconds;
        const bool pass = v.passed && in_time;
        failures += !pass;
        std::printf("[%s] %2d %s: %s; %.2f s (budget %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                    v.detail.c_str(), secs, c.budget_seconds, in_time ? "" : ", exceeded");
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
