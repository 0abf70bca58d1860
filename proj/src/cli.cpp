#include "entropytest/cli.hpp"

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "entropytest/error.hpp"
#include "entropytest/harness.hpp"
#include "entropytest/hypothesis_test.hpp"
#include "entropytest/rng.hpp"
#include "entropytest/sources.hpp"

namespace entropytest {

namespace {

constexpr int kUsage = 1;
constexpr int kInvariant = 2;
constexpr int kRuntime = 3;

struct TestArgs {
    std::string input;
    std::string alphabet = "binary";
    std::size_t order = 0;
    double alpha = 0.05;
    std::string measure = "mixture";
    double timeout_seconds = 60.0;
};

struct SimulateArgs {
    std::string source;
    std::size_t length = 0;
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::string output;
};

struct McArgs {
    std::string spec;
    std::optional<std::size_t> trials;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> threads;
    bool csv = false;
    bool timing = false;
    std::string output;
};

void emit(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ArgumentError("cannot write " + path);
    out << text;
}

int run_test_command(const TestArgs& a) {
    const auto alphabet = Alphabet::parse(a.alphabet);
    const auto seq = read_sequence_file(a.input, alphabet);
    auto evidence = parse_evidence(a.measure, alphabet.size(), a.order);
    if (auto* codec = std::get_if<ExternalCodec>(&evidence)) {
        if (!(a.timeout_seconds > 0.0)) throw ArgumentError("--timeout must be positive");
        codec->timeout = std::chrono::milliseconds(static_cast<std::int64_t>(a.timeout_seconds * 1000.0));
    }
    const auto outcome = run_test(seq, TestConfig{a.order, a.alpha, std::move(evidence)});
    std::cout << to_json(outcome).dump(2) << '\n';
    return 0;
}

int run_simulate_command(const SimulateArgs& a) {
    if (a.length < 1) throw ArgumentError("--length must be at least 1");
    const auto source = read_source_file(a.source);
    SeededRng rng(a.seed, a.stream);
    const auto seq = sample(source, a.length, rng);
    if (a.output.empty() || a.output == "-") {
        std::cout << render(seq);
        if (!source.alphabet().is_raw_bytes()) std::cout << '\n';
        std::cout.flush();
    } else {
        write_sequence_file(a.output, seq);
    }
    return 0;
}

int run_mc_command(const McArgs& a) {
    std::ifstream in(a.spec);
    if (!in) throw SpecError("cannot open experiment spec " + a.spec);
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("experiment spec " + a.spec + " is not valid JSON: " + e.what());
    }
    if (a.trials) doc["trials"] = *a.trials;
    if (a.seed) doc["seed"] = *a.seed;
    const auto base = std::filesystem::path(a.spec).parent_path().string();
    const auto spec = ExperimentSpec::from_json(doc, base.empty() ? "." : base);
    const auto threads = a.threads ? *a.threads : thread_count_from_env();

    const auto report = spec.hypothesis == Hypothesis::Null ? estimate_type1(spec, threads)
                                                            : estimate_power(spec, threads);
    emit(a.csv ? report.to_csv() : report.to_json(a.timing).dump(2) + "\n", a.output);
    if (!report.type1_within_bound()) {
        std::cerr << "type I rejections exceed the Binomial(N, alpha) 99.9% quantile\n";
        return kInvariant;
    }
    return 0;
}

int run_verify_command(const std::vector<std::string>& groups) {
    const auto results = verify_suite(groups);
    bool all = true;
    auto list = nlohmann::json::array();
    for (const auto& r : results) {
        all = all && r.passed;
        list.push_back(to_json(r));
    }
    std::cout << nlohmann::json{{"passed", all}, {"groups", list}}.dump(2) << '\n';
    return all ? 0 : kInvariant;
}

}  // namespace

int cli_main(int argc, char** argv) {
    CLI::App app{"Compression-based test for the order of a Markov source"};
    app.require_subcommand(1);

    TestArgs test_args;
    auto* test = app.add_subcommand("test", "Test H0: the sample is Markov of order <= m");
    test->add_option("--input", test_args.input, "Sequence file")->required()->check(CLI::ExistingFile);
    test->add_option("--alphabet", test_args.alphabet, "binary | byte | chars:<symbols>")->capture_default_str();
    test->add_option("--order", test_args.order, "Null order m")->capture_default_str();
    test->add_option("--alpha", test_args.alpha, "Level in (0, 1)")->capture_default_str();
    test->add_option("--measure", test_args.measure, "uniform | laplace | kt:<k> | mixture[:K] | code:<command>")
        ->capture_default_str();
    test->add_option("--timeout", test_args.timeout_seconds, "Codec timeout in seconds")->capture_default_str();

    SimulateArgs sim_args;
    auto* simulate = app.add_subcommand("simulate", "Sample a sequence from a source spec");
    simulate->add_option("--source", sim_args.source, "Source spec (JSON)")->required()->check(CLI::ExistingFile);
    simulate->add_option("--length", sim_args.length, "Sequence length")->required();
    simulate->add_option("--seed", sim_args.seed)->capture_default_str();
    simulate->add_option("--stream", sim_args.stream)->capture_default_str();
    simulate->add_option("--output", sim_args.output, "Output file (stdout if omitted)");

    McArgs mc_args;
    auto* mc = app.add_subcommand("mc", "Monte Carlo rejection rates for an experiment spec");
    mc->add_option("--spec", mc_args.spec, "Experiment spec (JSON)")->required()->check(CLI::ExistingFile);
    mc->add_option("--trials", mc_args.trials, "Override trials per length");
    mc->add_option("--seed", mc_args.seed, "Override base seed");
    mc->add_option("--threads", mc_args.threads, "Worker threads (default ENTROPYTEST_THREADS)")
        ->check(CLI::PositiveNumber);
    mc->add_flag("--csv", mc_args.csv, "Emit t,trials,rejections,rate,lo95,hi95");
    mc->add_flag("--timing", mc_args.timing, "Include wall time in the JSON report");
    mc->add_option("--output", mc_args.output, "Output file (stdout if omitted)");

    std::vector<std::string> groups;
    auto* verify = app.add_subcommand("verify", "Run the invariant suite");
    verify->add_option("--group", groups, "Invariant group (repeatable; all if omitted)")
        ->check(CLI::IsMember(verify_groups()));

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*test) return run_test_command(test_args);
        if (*simulate) return run_simulate_command(sim_args);
        if (*mc) return run_mc_command(mc_args);
        return run_verify_command(groups);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const ArgumentError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const SpecError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntime;
    }
}

}  // namespace entropytest
