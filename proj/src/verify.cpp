// Cross-module invariant checks behind `entropytest verify`.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>

#include "entropytest/codecs.hpp"
#include "entropytest/entropy.hpp"
#include "entropytest/error.hpp"
#include "entropytest/harness.hpp"
#include "entropytest/predictors.hpp"

namespace entropytest {

namespace {

Alphabet alphabet_of_size(std::size_t n) { return n == 2 ? Alphabet::binary() : Alphabet::chars("012"); }

Sequence word_sequence(const Alphabet& alphabet, WordKey key, std::size_t t) {
    return Sequence(alphabet, word_from_key(key, alphabet.size(), t));
}

SourceModel random_markov(SeededRng& rng, const Alphabet& alphabet, std::size_t order) {
    const auto n = alphabet.size();
    const auto rows = *checked_power(n, order);
    std::vector<double> transitions;
    for (std::uint64_t r = 0; r < rows; ++r) {
        auto row = rng.simplex(n);
        transitions.insert(transitions.end(), row.begin(), row.end());
    }
    return SourceModel::markov(alphabet, order, std::move(transitions));
}

// Random lengths in [1, max_len], lengthened uniformly until Kraft <= 1.
CodeLengthTable random_kraft_table(SeededRng& rng, std::size_t n, std::size_t block, int max_len) {
    CodeLengthTable table(n, block);
    const auto words = *checked_power(n, block);
    std::vector<int> lengths(words);
    for (auto& l : lengths) l = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_len));
    double kraft = 0.0;
    for (int l : lengths) kraft += std::ldexp(1.0, -l);
    const int shift = kraft > 1.0 ? static_cast<int>(std::ceil(std::log2(kraft))) : 0;
    for (std::uint64_t w = 0; w < words; ++w) table.set(w, lengths[w] + shift);
    return table;
}

// Canonical prefix code for the given lengths (sorted ascending); returns
// false if some codeword would not fit, which Kraft <= 1 rules out.
bool canonical_prefix_code_exists(std::vector<int> lengths) {
    std::sort(lengths.begin(), lengths.end());
    std::vector<std::pair<std::uint64_t, int>> codes;
    std::uint64_t code = 0;
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (i > 0) code = (code + 1) << (lengths[i] - lengths[i - 1]);
        if (lengths[i] < 64 && code >= (std::uint64_t{1} << lengths[i])) return false;
        codes.emplace_back(code, lengths[i]);
    }
    for (std::size_t i = 0; i < codes.size(); ++i)
        for (std::size_t j = i + 1; j < codes.size(); ++j) {
            const auto [ci, li] = codes[i];
            const auto [cj, lj] = codes[j];
            if ((cj >> (lj - li)) == ci) return false;
        }
    return true;
}

CheckResult check_kraft(std::uint64_t seed) {
    CheckResult r{"kraft", true, 0, nlohmann::json::object()};
    auto expect = [&](const char* name, const CodeLengthTable& table, double value) {
        const double got = kraft_sum(table);
        r.details[name] = got;
        r.passed = r.passed && got == value;
        ++r.checked;
    };
    CodeLengthTable prefix(3, 1);  // {0, 10, 11}
    prefix.set(0, 1);
    prefix.set(1, 2);
    prefix.set(2, 2);
    expect("prefix_0_10_11", prefix, 1.0);
    CodeLengthTable fixed(3, 1);
    for (WordKey w = 0; w < 3; ++w) fixed.set(w, 2);
    expect("fixed_2bit_3_symbols", fixed, 0.75);
    CodeLengthTable psi(2, 1);  // a -> 0, b -> 00: Kraft holds yet not uniquely decodable
    psi.set(0, 1);
    psi.set(1, 2);
    expect("psi_0_00", psi, 0.75);

    SeededRng rng(seed, 1);
    std::uint64_t feasible = 0;
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 2 + rng.next() % 2;
        const std::size_t block = 1 + rng.next() % 3;
        const auto table = random_kraft_table(rng, n, block, 12);
        std::vector<int> lengths;
        for (const auto& [w, l] : table.entries()) lengths.push_back(l);
        const bool kraft_ok = kraft_sum(table) <= 1.0;
        const bool prefix_ok = canonical_prefix_code_exists(lengths);
        r.passed = r.passed && kraft_ok && prefix_ok;
        feasible += prefix_ok;
        ++r.checked;
    }
    r.details["random_tables_with_prefix_code"] = feasible;
    return r;
}

CheckResult check_code_measure(std::uint64_t seed) {
    CheckResult r{"code-measure", true, 0, nlohmann::json::object()};
    SeededRng rng(seed, 2);
    double worst_margin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < 300; ++i) {
        const std::size_t n = 2 + rng.next() % 2;
        const std::size_t block = 1 + rng.next() % 3;
        const auto table = random_kraft_table(rng, n, block, 16);
        const auto mu = code_to_measure(table);
        double total = 0.0;
        for (const auto& [w, len] : table.entries()) {
            const double margin = static_cast<double>(len) - (-mu.log2_probability(w));
            worst_margin = std::min(worst_margin, margin);
            r.passed = r.passed && margin >= -1e-12;
            total += mu.probability(w);
            ++r.checked;
        }
        r.passed = r.passed && std::abs(total - 1.0) <= 1e-9;
    }
    r.details["min_len_minus_neglog_mu"] = worst_margin;
    return r;
}

CheckResult check_laplace_bound(std::uint64_t seed) {
    CheckResult r{"laplace-bound", true, 0, nlohmann::json::object()};
    SeededRng rng(seed, 3);
    double worst_nats = 0.0;
    double worst_bits = 0.0;
    for (std::size_t n : {2, 3}) {
        const auto alphabet = alphabet_of_size(n);
        const auto laplace = laplace_measure(n);
        for (int s = 0; s < 100; ++s) {
            const auto source = SourceModel::bernoulli(alphabet, rng.simplex(n));
            const auto rho = expected_step_errors(source, *laplace, 10);
            for (std::size_t t = 0; t < rho.size(); ++t) {
                const double x = static_cast<double>(n - 1) / static_cast<double>(t + 1);
                const double nats = rho[t] * std::numbers::ln2;
                worst_nats = std::max(worst_nats, nats / x);
                worst_bits = std::max(worst_bits, rho[t] / std::log2(1.0 + x));
                r.passed = r.passed && nats < x && rho[t] < std::log2(1.0 + x);
                ++r.checked;
            }
        }
    }
    r.details["max_ratio_nats_to_(n-1)/(t+1)"] = worst_nats;
    r.details["max_ratio_bits_to_log2(1+(n-1)/(t+1))"] = worst_bits;
    return r;
}

CheckResult check_markov_domination(std::uint64_t seed) {
    CheckResult r{"appendix-domination", true, 0, nlohmann::json::object()};
    SeededRng rng(seed, 4);
    const auto alphabet = Alphabet::binary();
    double worst = -std::numeric_limits<double>::infinity();
    for (std::size_t m = 0; m <= 2; ++m) {
        for (int s = 0; s < 100; ++s) {
            const auto source = random_markov(rng, alphabet, rng.next() % (m + 1));
            for (std::size_t t = m + 1; t <= 10; ++t) {
                for (WordKey w = 0; w < (WordKey{1} << t); ++w) {
                    const auto x = word_sequence(alphabet, w, t);
                    const double gap = log_probability(source, x) - max_markov_log_prob(x, m);
                    worst = std::max(worst, gap);
                    r.passed = r.passed && gap <= 1e-12;
                    ++r.checked;
                }
            }
        }
    }
    r.details["max_log2_tau_minus_bound"] = worst;
    return r;
}

CheckResult check_normalization(std::uint64_t seed) {
    CheckResult r{"normalization", true, 0, nlohmann::json::object()};
    SeededRng rng(seed, 5);
    double worst = 0.0;
    for (std::size_t n : {2, 3}) {
        const auto alphabet = alphabet_of_size(n);
        std::vector<MeasurePtr> measures{laplace_measure(n), kt_measure(n, 0), kt_measure(n, 1), kt_measure(n, 2),
                                         universal_measure(n, 2), uniform_measure(n)};
        const std::vector<SourceModel> sources{
            SourceModel::bernoulli(alphabet, rng.simplex(n)), random_markov(rng, alphabet, 2),
            SourceModel::hidden_markov(alphabet, 2, [&] {
                auto a = rng.simplex(2), b = rng.simplex(2);
                a.insert(a.end(), b.begin(), b.end());
                return a;
            }(), [&] {
                std::vector<double> e;
                for (int h = 0; h < 2; ++h) {
                    auto row = rng.simplex(n);
                    e.insert(e.end(), row.begin(), row.end());
                }
                return e;
            }())};
        for (std::size_t t = 1; t <= 8; ++t) {
            const auto words = *checked_power(n, t);
            for (const auto& mu : measures) {
                double total = 0.0;
                for (WordKey w = 0; w < words; ++w)
                    total += std::exp2(log_measure(*mu, word_from_key(w, n, t)));
                worst = std::max(worst, std::abs(total - 1.0));
                r.passed = r.passed && std::abs(total - 1.0) <= 1e-9;
                ++r.checked;
            }
            for (const auto& src : sources) {
                double total = 0.0;
                for (WordKey w = 0; w < words; ++w) total += std::exp2(log_probability(src, word_from_key(w, n, t)));
                worst = std::max(worst, std::abs(total - 1.0));
                r.passed = r.passed && std::abs(total - 1.0) <= 1e-9;
                ++r.checked;
            }
        }
    }
    r.details["max_abs_deviation"] = worst;
    return r;
}

CheckResult check_type1_exact(std::uint64_t seed) {
    CheckResult r{"type1-exact", true, 0, nlohmann::json::object()};
    SeededRng rng(seed, 6);
    const auto alphabet = Alphabet::binary();
    const auto laplace = laplace_measure(2);
    constexpr std::size_t t = 8;
    double worst = 0.0;
    auto sizes = nlohmann::json::object();
    for (double alpha : {0.1, 0.5}) {
        std::vector<WordKey> critical;
        for (WordKey w = 0; w < (WordKey{1} << t); ++w)
            if (run_predictor_test(word_sequence(alphabet, w, t), 0, *laplace, alpha).decision == Decision::Reject)
                critical.push_back(w);
        sizes[std::to_string(alpha).substr(0, 3)] = critical.size();
        for (int s = 0; s < 50; ++s) {
            const auto source = SourceModel::bernoulli(alphabet, rng.simplex(2));
            double rejected_mass = 0.0;
            for (WordKey w : critical) rejected_mass += std::exp2(log_probability(source, word_from_key(w, 2, t)));
            worst = std::max(worst, rejected_mass / alpha);
            r.passed = r.passed && rejected_mass <= alpha + 1e-12;
            ++r.checked;
        }
    }
    r.details["critical_set_sizes"] = sizes;
    r.details["max_rejected_mass_over_alpha"] = worst;
    return r;
}

CheckResult check_worked_values(std::uint64_t) {
    CheckResult r{"worked-values", true, 0, nlohmann::json::object()};
    const auto alphabet = Alphabet::binary();
    const auto laplace = laplace_measure(2);
    auto pred = laplace->predictor();
    const auto history = parse_sequence("01010", alphabet);
    for (Symbol s : history.symbols()) pred->update(s);
    const double p0 = pred->probability(0), p1 = pred->probability(1);
    const double l0101 = std::exp2(log_measure(*laplace, parse_sequence("0101", alphabet)));
    const auto nu = word_counts(parse_sequence("000100", alphabet), 2).count(WordKey{0});
    r.details = {{"L(0|01010)", p0}, {"L(1|01010)", p1}, {"L(0101)", l0101}, {"nu6(00)", nu}};
    r.passed = std::abs(p0 - 4.0 / 7.0) <= 1e-12 && std::abs(p1 - 3.0 / 7.0) <= 1e-12 &&
               std::abs(l0101 - 1.0 / 30.0) <= 1e-12 && nu == 3;
    r.checked = 4;
    return r;
}

const std::map<std::string, std::function<CheckResult(std::uint64_t)>>& registry() {
    static const std::map<std::string, std::function<CheckResult(std::uint64_t)>> groups{
        {"kraft", check_kraft},
        {"code-measure", check_code_measure},
        {"laplace-bound", check_laplace_bound},
        {"appendix-domination", check_markov_domination},
        {"normalization", check_normalization},
        {"type1-exact", check_type1_exact},
        {"worked-values", check_worked_values},
    };
    return groups;
}

}  // namespace

std::vector<std::string> verify_groups() {
    std::vector<std::string> names;
    for (const auto& [name, fn] : registry()) names.push_back(name);
    return names;
}

std::vector<CheckResult> verify_suite(std::span<const std::string> groups, std::uint64_t seed) {
    const auto& reg = registry();
    std::vector<std::string> selected(groups.begin(), groups.end());
    if (selected.empty()) selected = verify_groups();
    for (const auto& g : selected)
        if (!reg.contains(g)) throw ArgumentError("unknown verify group '" + g + "'");
    std::vector<CheckResult> results;
    for (const auto& g : selected) results.push_back(reg.at(g)(seed));
    return results;
}

nlohmann::json to_json(const CheckResult& result) {
    return {{"group", result.group}, {"passed", result.passed}, {"checked", result.checked}, {"details", result.details}};
}

}  // namespace entropytest
