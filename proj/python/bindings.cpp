#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "entropytest/codecs.hpp"
#include "entropytest/entropy.hpp"
#include "entropytest/error.hpp"
#include "entropytest/harness.hpp"
#include "entropytest/hypothesis_test.hpp"
#include "entropytest/predictors.hpp"
#include "entropytest/rng.hpp"
#include "entropytest/sources.hpp"

namespace py = pybind11;
namespace et = entropytest;

namespace {

// Structured results cross the boundary as JSON text; the Python package
// decodes them.
std::string run_test_json(const et::Sequence& seq, std::size_t order, double alpha, const std::string& measure) {
    const auto evidence = et::parse_evidence(measure, seq.alphabet().size(), order);
    return et::to_json(et::run_test(seq, et::TestConfig{order, alpha, evidence})).dump();
}

std::string run_mc_json(const std::string& spec_json, const std::string& base_dir, std::size_t threads) {
    const auto spec = et::ExperimentSpec::from_json(nlohmann::json::parse(spec_json), base_dir);
    py::gil_scoped_release release;
    const auto report = spec.hypothesis == et::Hypothesis::Null ? et::estimate_type1(spec, threads)
                                                                : et::estimate_power(spec, threads);
    return report.to_json().dump();
}

std::string verify_json(const std::vector<std::string>& groups, std::uint64_t seed) {
    auto out = nlohmann::json::array();
    for (const auto& r : et::verify_suite(groups, seed)) out.push_back(et::to_json(r));
    return out.dump();
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Compression-based test for the order of a Markov source";

    auto base = py::register_exception<et::Error>(m, "Error", PyExc_RuntimeError);
    py::register_exception<et::ArgumentError>(m, "ArgumentError", base.ptr());
    py::register_exception<et::ParseError>(m, "ParseError", base.ptr());
    py::register_exception<et::SpecError>(m, "SpecError", base.ptr());
    py::register_exception<et::ModelError>(m, "ModelError", base.ptr());
    py::register_exception<et::CapacityError>(m, "CapacityError", base.ptr());
    py::register_exception<et::UnsupportedError>(m, "UnsupportedError", base.ptr());
    py::register_exception<et::CodecError>(m, "CodecError", base.ptr());

    py::class_<et::Alphabet>(m, "Alphabet")
        .def(py::init([](const std::string& spec) { return et::Alphabet::parse(spec); }), py::arg("spec"))
        .def_property_readonly("size", &et::Alphabet::size)
        .def_property_readonly("spec", &et::Alphabet::spec)
        .def("__eq__", [](const et::Alphabet& a, const et::Alphabet& b) { return a == b; })
        .def("__repr__", [](const et::Alphabet& a) { return "Alphabet('" + a.spec() + "')"; });

    py::class_<et::Sequence>(m, "Sequence")
        .def_property_readonly("alphabet", &et::Sequence::alphabet)
        .def("__len__", &et::Sequence::size)
        .def("symbols", [](const et::Sequence& s) { return std::vector<et::Symbol>(s.symbols().begin(), s.symbols().end()); })
        .def("render", [](const et::Sequence& s) { return py::bytes(et::render(s)); })
        .def("__eq__", [](const et::Sequence& a, const et::Sequence& b) { return a == b; });

    m.def("parse_sequence",
          [](py::bytes payload, const et::Alphabet& alphabet) {
              return et::parse_sequence(std::string(payload), alphabet);
          },
          py::arg("payload"), py::arg("alphabet"));
    m.def("read_sequence_file", [](const std::string& p, const et::Alphabet& a) { return et::read_sequence_file(p, a); },
          py::arg("path"), py::arg("alphabet"));

    py::class_<et::SourceModel>(m, "SourceModel")
        .def_static("from_json", [](const std::string& doc) { return et::source_from_json(nlohmann::json::parse(doc)); })
        .def_static("read", [](const std::string& path) { return et::read_source_file(path); })
        .def_property_readonly("alphabet", &et::SourceModel::alphabet)
        .def_property_readonly("order", &et::SourceModel::order)
        .def_property_readonly("stationary_start", &et::SourceModel::stationary_start)
        .def("to_json", [](const et::SourceModel& s) { return s.to_json().dump(); });

    m.def("sample",
          [](const et::SourceModel& source, std::size_t t, std::uint64_t seed, std::uint64_t stream) {
              et::SeededRng rng(seed, stream);
              return et::sample(source, t, rng);
          },
          py::arg("source"), py::arg("t"), py::arg("seed") = 0, py::arg("stream") = 0);
    m.def("log_probability", py::overload_cast<const et::SourceModel&, const et::Sequence&>(&et::log_probability));
    m.def("stationary_distribution", &et::stationary_distribution);
    m.def("conditional_entropy", &et::conditional_entropy, py::arg("source"), py::arg("k"));
    m.def("limit_entropy", &et::limit_entropy);

    m.def("empirical_entropy", &et::empirical_entropy, py::arg("seq"), py::arg("k"));
    m.def("max_markov_log_prob", &et::max_markov_log_prob, py::arg("seq"), py::arg("m"));
    m.def("word_count",
          [](const et::Sequence& seq, const std::vector<et::Symbol>& word) {
              return et::word_counts(seq, word.size()).count(word);
          },
          py::arg("seq"), py::arg("word"));

    m.def("log_measure",
          [](const std::string& spec, const et::Sequence& seq) {
              const auto n = seq.alphabet().size();
              return et::log_measure(*et::parse_measure(spec, n, et::default_max_order(n)), seq);
          },
          py::arg("measure"), py::arg("seq"));
    m.def("kl_divergence",
          [](const std::vector<double>& p, const std::vector<double>& q) { return et::kl_divergence(p, q); });
    m.def("kraft_sum", [](const std::vector<int>& lengths, std::size_t alphabet_size) {
        et::CodeLengthTable table(alphabet_size, 1);
        for (std::size_t i = 0; i < lengths.size(); ++i) table.set(i, lengths[i]);
        return et::kraft_sum(table);
    }, py::arg("lengths"), py::arg("alphabet_size"));
    m.def("external_code_length",
          [](const std::string& command, const et::Sequence& seq) {
              return et::external_code_length(et::ExternalCodec{command}, seq);
          },
          py::arg("command"), py::arg("seq"));

    m.def("test_statistic", &et::test_statistic, py::arg("seq"), py::arg("m"), py::arg("evidence_bits"));
    m.def("p_value_bound", &et::p_value_bound);
    m.def("_run_test", &run_test_json, py::arg("seq"), py::arg("order"), py::arg("alpha"), py::arg("measure"));
    m.def("_run_mc", &run_mc_json, py::arg("spec"), py::arg("base_dir"), py::arg("threads"));
    m.def("_verify", &verify_json, py::arg("groups"), py::arg("seed"));
    m.def("verify_groups", &et::verify_groups);
}
