#include "entropytest/harness.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <mutex>
#include <sstream>
#include <thread>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/binomial.hpp>

#include "entropytest/error.hpp"

namespace entropytest {

namespace {

std::string hypothesis_name(Hypothesis h) { return h == Hypothesis::Null ? "H0" : "H1"; }

Hypothesis parse_hypothesis(const std::string& s) {
    if (s == "H0" || s == "h0" || s == "null") return Hypothesis::Null;
    if (s == "H1" || s == "h1" || s == "alternative") return Hypothesis::Alternative;
    throw SpecError("hypothesis must be H0 or H1, got '" + s + "'");
}

template <class Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn) {
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const auto i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(count);
                return;
            }
        }
    };
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
    pool.clear();
    if (failure) std::rethrow_exception(failure);
}

}  // namespace

void ExperimentSpec::validate() const {
    if (trials < 1) throw SpecError("trials must be at least 1");
    if (lengths.empty()) throw SpecError("length grid is empty");
    for (std::size_t i = 0; i < lengths.size(); ++i) {
        if (lengths[i] <= order)
            throw SpecError("every length must exceed the order " + std::to_string(order));
        if (i > 0 && lengths[i] <= lengths[i - 1]) throw SpecError("length grid must be strictly increasing");
    }
    if (!(alpha > 0.0 && alpha < 1.0)) throw SpecError("alpha must lie in (0, 1)");
    try {
        (void)parse_evidence(evidence, source.alphabet().size(), order);
    } catch (const ArgumentError& e) {
        throw SpecError(e.what());
    }
}

nlohmann::json ExperimentSpec::to_json() const {
    return {{"hypothesis", hypothesis_name(hypothesis)},
            {"source", source.to_json()},
            {"order", order},
            {"alpha", alpha},
            {"measure", evidence},
            {"lengths", lengths},
            {"trials", trials},
            {"seed", seed}};
}

ExperimentSpec ExperimentSpec::from_json(const nlohmann::json& doc, const std::string& base_dir) {
    try {
        auto source = [&] {
            if (doc.contains("source")) return source_from_json(doc.at("source"));
            if (doc.contains("source_file")) {
                std::filesystem::path p = doc.at("source_file").get<std::string>();
                if (p.is_relative()) p = std::filesystem::path(base_dir) / p;
                return read_source_file(p);
            }
            throw SpecError("experiment needs a source or source_file");
        }();
        ExperimentSpec spec{.hypothesis = parse_hypothesis(doc.value("hypothesis", std::string("H0"))),
                            .source = std::move(source),
                            .order = doc.value("order", std::size_t{0}),
                            .alpha = doc.value("alpha", 0.05),
                            .evidence = doc.value("measure", std::string("mixture")),
                            .lengths = doc.at("lengths").get<std::vector<std::size_t>>(),
                            .trials = doc.value("trials", std::size_t{100}),
                            .seed = doc.value("seed", std::uint64_t{0})};
        spec.validate();
        return spec;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed experiment spec: ") + e.what());
    }
}

BinomialInterval clopper_pearson(std::uint64_t successes, std::uint64_t trials, double confidence) {
    if (trials == 0 || successes > trials) throw ArgumentError("clopper_pearson needs 0 <= k <= n, n >= 1");
    const double tail = (1.0 - confidence) / 2.0;
    const auto k = static_cast<double>(successes);
    const auto n = static_cast<double>(trials);
    BinomialInterval ci{0.0, 1.0};
    if (successes > 0) ci.lower = boost::math::quantile(boost::math::beta_distribution<>(k, n - k + 1.0), tail);
    if (successes < trials)
        ci.upper = boost::math::quantile(boost::math::beta_distribution<>(k + 1.0, n - k), 1.0 - tail);
    return ci;
}

std::uint64_t binomial_quantile(std::uint64_t trials, double p, double q) {
    const boost::math::binomial_distribution<> dist(static_cast<double>(trials), p);
    std::uint64_t k = 0;
    while (k < trials && boost::math::cdf(dist, static_cast<double>(k)) < q) ++k;
    return k;
}

bool MonteCarloReport::type1_within_bound() const {
    for (const auto& c : cells)
        if (c.type1_limit && c.rejections > *c.type1_limit) return false;
    return true;
}

nlohmann::json MonteCarloReport::to_json(bool include_timing) const {
    auto cells_json = nlohmann::json::array();
    for (const auto& c : cells) {
        nlohmann::json cell = {{"t", c.t},         {"trials", c.trials},     {"rejections", c.rejections},
                               {"rate", c.rate},   {"lo95", c.ci95.lower},   {"hi95", c.ci95.upper}};
        if (c.type1_limit) cell["type1_limit"] = *c.type1_limit;
        cells_json.push_back(std::move(cell));
    }
    nlohmann::json doc = {{"spec", spec.to_json()}, {"seed", spec.seed}, {"cells", std::move(cells_json)}};
    if (spec.hypothesis == Hypothesis::Null) doc["type1_within_bound"] = type1_within_bound();
    if (include_timing) doc["wall_seconds"] = wall_seconds;
    return doc;
}

std::string MonteCarloReport::to_csv() const {
    // shortest round-trip form, as in the JSON report
    auto num = [](double x) { return nlohmann::json(x).dump(); };
    std::ostringstream os;
    os << "t,trials,rejections,rate,lo95,hi95\n";
    for (const auto& c : cells)
        os << c.t << ',' << c.trials << ',' << c.rejections << ',' << num(c.rate) << ',' << num(c.ci95.lower) << ','
           << num(c.ci95.upper) << '\n';
    return os.str();
}

MonteCarloReport run_experiment(const ExperimentSpec& spec, std::size_t threads) {
    spec.validate();
    const auto started = std::chrono::steady_clock::now();
    const auto n = spec.source.alphabet().size();
    const TestConfig config{spec.order, spec.alpha, parse_evidence(spec.evidence, n, spec.order)};

    MonteCarloReport report{spec, {}, 0.0};
    for (std::size_t c = 0; c < spec.lengths.size(); ++c) {
        const auto t = spec.lengths[c];
        std::vector<std::uint8_t> rejected(spec.trials, 0);
        parallel_for(spec.trials, threads, [&](std::size_t i) {
            SeededRng rng(spec.seed, (static_cast<std::uint64_t>(c) << 32) | i);
            const auto seq = sample(spec.source, t, rng);
            rejected[i] = run_test(seq, config).decision == Decision::Reject;
        });
        CellResult cell;
        cell.t = t;
        cell.trials = spec.trials;
        for (auto r : rejected) cell.rejections += r;
        cell.rate = static_cast<double>(cell.rejections) / static_cast<double>(cell.trials);
        cell.ci95 = clopper_pearson(cell.rejections, cell.trials);
        if (spec.hypothesis == Hypothesis::Null) cell.type1_limit = binomial_quantile(spec.trials, spec.alpha, 0.999);
        report.cells.push_back(cell);
    }
    report.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return report;
}

MonteCarloReport estimate_type1(const ExperimentSpec& spec, std::size_t threads) {
    if (spec.hypothesis != Hypothesis::Null) throw SpecError("type I estimation needs an H0 experiment");
    const auto order = spec.source.order();
    if (!order || *order > spec.order)
        throw SpecError("H0 source must be Markov of order <= " + std::to_string(spec.order));
    return run_experiment(spec, threads);
}

MonteCarloReport estimate_power(const ExperimentSpec& spec, std::size_t threads) {
    if (spec.hypothesis != Hypothesis::Alternative) throw SpecError("power estimation needs an H1 experiment");
    const auto order = spec.source.order();
    if (order && *order <= spec.order)
        throw SpecError("H1 source has order " + std::to_string(*order) + ", which the null order " +
                        std::to_string(spec.order) + " already covers");
    return run_experiment(spec, threads);
}

std::size_t thread_count_from_env() {
    if (const char* v = std::getenv("ENTROPYTEST_THREADS")) {
        char* end = nullptr;
        const auto n = std::strtoul(v, &end, 10);
        if (end != v && *end == '\0' && n > 0) return n;
    }
    return std::max(1U, std::thread::hardware_concurrency());
}

}  // namespace entropytest
