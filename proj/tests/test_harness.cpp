#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "entropytest/error.hpp"
#include "entropytest/harness.hpp"

using namespace entropytest;

namespace {

// P(Binomial(n, p) <= k) by direct summation in log space.
double binom_cdf(std::uint64_t n, double p, std::uint64_t k) {
    double total = 0.0;
    for (std::uint64_t i = 0; i <= k; ++i) {
        const double ln = std::lgamma(n + 1.0) - std::lgamma(i + 1.0) - std::lgamma(n - i + 1.0) +
                          static_cast<double>(i) * std::log(p) + static_cast<double>(n - i) * std::log1p(-p);
        total += std::exp(ln);
    }
    return total;
}

double bisect(auto f, double lo, double hi) {
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (f(mid) ? hi : lo) = mid;
    }
    return 0.5 * (lo + hi);
}

SourceModel bern(double p1) { return SourceModel::bernoulli(Alphabet::binary(), {1 - p1, p1}); }

SourceModel stay(double p) { return SourceModel::markov(Alphabet::binary(), 1, {p, 1 - p, 1 - p, p}); }

}  // namespace

TEST_CASE("Clopper-Pearson matches a summation oracle") {
    for (auto [k, n] : std::vector<std::pair<std::uint64_t, std::uint64_t>>{{0, 10}, {3, 10}, {10, 10}, {7, 2000}, {480, 500}}) {
        const auto ci = clopper_pearson(k, n);
        // upper: P(X <= k | p) = 0.025; lower: P(X >= k | p) = 0.025
        const double up = k == n ? 1.0 : bisect([&](double p) { return binom_cdf(n, p, k) < 0.025; }, 0.0, 1.0);
        const double lo =
            k == 0 ? 0.0 : bisect([&](double p) { return 1.0 - binom_cdf(n, p, k - 1) > 0.025; }, 0.0, 1.0);
        CHECK(ci.upper == doctest::Approx(up).epsilon(1e-8));
        CHECK(ci.lower == doctest::Approx(lo).epsilon(1e-8));
    }
    CHECK_THROWS_AS(clopper_pearson(3, 2), ArgumentError);
    CHECK_THROWS_AS(clopper_pearson(0, 0), ArgumentError);
}

TEST_CASE("binomial quantile matches a summation oracle") {
    for (auto [n, p] : std::vector<std::pair<std::uint64_t, double>>{{2000, 0.05}, {500, 0.5}, {100, 0.01}, {50, 0.3}}) {
        const auto q = binomial_quantile(n, p, 0.999);
        CHECK(binom_cdf(n, p, q) >= 0.999 - 1e-12);
        if (q > 0) CHECK(binom_cdf(n, p, q - 1) < 0.999);
    }
}

TEST_CASE("experiment validation") {
    ExperimentSpec spec{.hypothesis = Hypothesis::Null, .source = bern(0.3), .order = 0, .lengths = {100, 200}, .trials = 5};
    CHECK_NOTHROW(spec.validate());
    auto bad = spec;
    bad.trials = 0;
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = spec;
    bad.lengths = {200, 100};
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = spec;
    bad.order = 100;
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = spec;
    bad.alpha = 1.0;
    CHECK_THROWS_AS(bad.validate(), SpecError);
    bad = spec;
    bad.evidence = "nonsense";
    CHECK_THROWS_AS(bad.validate(), SpecError);

    auto h0_wrong = spec;
    h0_wrong.source = stay(0.9);
    CHECK_THROWS_AS(estimate_type1(h0_wrong), SpecError);
    auto h1_wrong = spec;
    h1_wrong.hypothesis = Hypothesis::Alternative;
    h1_wrong.order = 1;
    h1_wrong.source = stay(0.9);
    CHECK_THROWS_AS(estimate_power(h1_wrong), SpecError);
    CHECK_THROWS_AS(estimate_power(spec), SpecError);
}

TEST_CASE("degenerate source never rejects") {
    ExperimentSpec spec{.hypothesis = Hypothesis::Null,
                        .source = SourceModel::bernoulli(Alphabet::binary(), {1.0, 0.0}),
                        .order = 0,
                        .lengths = {10, 100, 1000},
                        .trials = 50};
    for (const char* ev : {"mixture", "laplace", "kt:2", "uniform"}) {
        spec.evidence = ev;
        const auto report = estimate_type1(spec);
        for (const auto& c : report.cells) CHECK(c.rejections == 0);
    }
}

TEST_CASE("reports are byte-identical across worker counts") {
    ExperimentSpec spec{.hypothesis = Hypothesis::Alternative,
                        .source = stay(0.7),
                        .order = 0,
                        .alpha = 0.05,
                        .lengths = {50, 200},
                        .trials = 60,
                        .seed = 77};
    const auto one = estimate_power(spec, 1).to_json().dump();
    const auto four = estimate_power(spec, 4).to_json().dump();
    CHECK(one == four);
    CHECK(estimate_power(spec, 3).to_csv() == estimate_power(spec, 1).to_csv());
    spec.seed = 78;
    CHECK(estimate_power(spec, 1).to_json().dump() != one);
}

TEST_CASE("report contents") {
    ExperimentSpec spec{.hypothesis = Hypothesis::Null, .source = bern(0.3), .order = 0, .alpha = 0.5,
                        .lengths = {30, 60}, .trials = 200, .seed = 1};
    const auto r = estimate_type1(spec);
    REQUIRE(r.cells.size() == 2);
    for (const auto& c : r.cells) {
        CHECK(c.rejections <= c.trials);
        CHECK(c.rate == doctest::Approx(static_cast<double>(c.rejections) / 200.0));
        CHECK(c.ci95.lower <= c.rate);
        CHECK(c.rate <= c.ci95.upper);
        REQUIRE(c.type1_limit.has_value());
        CHECK(c.rejections <= *c.type1_limit);
    }
    CHECK(r.type1_within_bound());
    const auto j = r.to_json();
    CHECK_FALSE(j.contains("wall_seconds"));
    CHECK(r.to_json(true).contains("wall_seconds"));
    CHECK(j["spec"]["lengths"] == nlohmann::json({30, 60}));
    const auto csv = r.to_csv();
    CHECK(csv.rfind("t,trials,rejections,rate,lo95,hi95\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 3);
}

TEST_CASE("experiment specs from JSON") {
    const auto dir = std::filesystem::temp_directory_path() / "entropytest_spec";
    std::filesystem::create_directories(dir);
    std::ofstream(dir / "src.json") << R"({"variant": "bernoulli", "alphabet": "binary", "probabilities": [0.7, 0.3]})";
    const auto doc = nlohmann::json::parse(R"({"hypothesis": "H0", "source_file": "src.json", "order": 0,
        "alpha": 0.05, "measure": "laplace", "lengths": [20, 40], "trials": 10, "seed": 3})");
    const auto spec = ExperimentSpec::from_json(doc, dir.string());
    CHECK(spec.source.is_bernoulli());
    CHECK(spec.evidence == "laplace");
    CHECK(spec.trials == 10);
    const auto again = ExperimentSpec::from_json(spec.to_json());
    CHECK(again.to_json() == spec.to_json());
    CHECK_THROWS_AS(ExperimentSpec::from_json(nlohmann::json::parse(R"({"lengths": [10]})")), SpecError);
    CHECK_THROWS_AS(ExperimentSpec::from_json(nlohmann::json::parse(R"({"hypothesis": "H2", "source_file": "src.json", "lengths": [10]})"), dir.string()),
                    SpecError);
    CHECK_THROWS_AS(ExperimentSpec::from_json(nlohmann::json::parse(R"({"source_file": "src.json", "lengths": "ten"})"), dir.string()),
                    SpecError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("thread count from the environment") {
    ::setenv("ENTROPYTEST_THREADS", "3", 1);
    CHECK(thread_count_from_env() == 3);
    ::setenv("ENTROPYTEST_THREADS", "zero", 1);
    CHECK(thread_count_from_env() >= 1);
    ::unsetenv("ENTROPYTEST_THREADS");
}

TEST_CASE("verify suite") {
    const auto names = verify_groups();
    CHECK(names.size() == 7);
    const std::vector<std::string> one{"kraft"};
    const auto r = verify_suite(one);
    REQUIRE(r.size() == 1);
    CHECK(r[0].passed);
    CHECK(r[0].checked > 3);
    CHECK(to_json(r[0])["group"] == "kraft");
    const std::vector<std::string> bad{"nope"};
    CHECK_THROWS_AS(verify_suite(bad), ArgumentError);
}
