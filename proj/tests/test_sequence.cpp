#include <doctest.h>

#include <filesystem>
#include <random>

#include "entropytest/error.hpp"
#include "entropytest/sequence.hpp"
#include "oracle.hpp"

using namespace entropytest;

namespace {

Sequence bin(std::string_view s) { return parse_sequence(s, Alphabet::binary()); }

}  // namespace

TEST_CASE("alphabet specs parse and round-trip") {
    CHECK(Alphabet::parse("binary").size() == 2);
    CHECK(Alphabet::parse("byte").size() == 256);
    CHECK(Alphabet::parse("byte").is_raw_bytes());
    const auto acgt = Alphabet::parse("chars:ACGT");
    CHECK(acgt.size() == 4);
    CHECK(acgt.index_of('G') == Symbol{2});
    CHECK_FALSE(acgt.index_of('X').has_value());
    CHECK(Alphabet::parse(acgt.spec()) == acgt);
    CHECK(Alphabet::parse(Alphabet::binary().spec()) == Alphabet::binary());
    CHECK_THROWS_AS(Alphabet::parse("chars:A"), ArgumentError);
    CHECK_THROWS_AS(Alphabet::parse("chars:AA"), ArgumentError);
    CHECK_THROWS_AS(Alphabet::parse("chars:A\nB"), ArgumentError);
    CHECK_THROWS_AS(Alphabet::parse("ternary"), ArgumentError);
}

TEST_CASE("text payloads map to indices") {
    const auto s = bin("01010");
    REQUIRE(s.size() == 5);
    CHECK(std::vector<Symbol>(s.symbols().begin(), s.symbols().end()) == std::vector<Symbol>{0, 1, 0, 1, 0});
    CHECK(bin("01\n0\r\n10\n").size() == 5);
}

TEST_CASE("bad symbol reports its 1-based position") {
    try {
        (void)bin("01a10");
        FAIL("expected ParseError");
    } catch (const ParseError& e) {
        CHECK(e.position() == 3);
    }
    CHECK_THROWS_AS(bin(""), ParseError);
    CHECK_THROWS_AS(bin("\n\n"), ParseError);
}

TEST_CASE("byte mode is verbatim") {
    const std::string raw{"\x00\xff\n", 3};
    const auto s = parse_sequence(raw, Alphabet::bytes());
    REQUIRE(s.size() == 3);
    CHECK(s[0] == 0);
    CHECK(s[1] == 255);
    CHECK(s[2] == 10);
    CHECK(s.alphabet().size() == 256);
}

TEST_CASE("parse after render is the identity") {
    std::mt19937 gen(5);
    const auto acg = Alphabet::chars("ACG");
    for (int i = 0; i < 50; ++i) {
        std::vector<Symbol> v(1 + gen() % 40);
        for (auto& x : v) x = static_cast<Symbol>(gen() % 3);
        const Sequence s(acg, v);
        CHECK(parse_sequence(render(s), acg) == s);
        std::vector<Symbol> b(1 + gen() % 40);
        for (auto& x : b) x = static_cast<Symbol>(gen() % 256);
        const Sequence sb(Alphabet::bytes(), b);
        CHECK(parse_sequence(render(sb), Alphabet::bytes()) == sb);
    }
}

TEST_CASE("sequence files round-trip") {
    const auto dir = std::filesystem::temp_directory_path();
    const auto text = dir / "entropytest_seq.txt";
    write_sequence_file(text, bin("0110"));
    CHECK(read_sequence_file(text, Alphabet::binary()) == bin("0110"));
    const Sequence bytes(Alphabet::bytes(), {13, 10, 0, 200});
    const auto raw = dir / "entropytest_seq.bin";
    write_sequence_file(raw, bytes);
    CHECK(read_sequence_file(raw, Alphabet::bytes()) == bytes);
    std::filesystem::remove(text);
    std::filesystem::remove(raw);
    CHECK_THROWS_AS(read_sequence_file(dir / "entropytest_missing.txt", Alphabet::binary()), ArgumentError);
}

TEST_CASE("overlapping word counts") {
    const auto x = bin("000100");
    const auto c2 = word_counts(x, 2);
    CHECK(c2.count(std::vector<Symbol>{0, 0}) == 3);
    CHECK(c2.count(std::vector<Symbol>{0, 1}) == 1);
    CHECK(c2.count(std::vector<Symbol>{1, 0}) == 1);
    CHECK(c2.count(std::vector<Symbol>{1, 1}) == 0);
    const auto c1 = word_counts(x, 1);
    CHECK(c1.count(WordKey{0}) == 5);
    CHECK(c1.count(WordKey{1}) == 1);
    const auto c6 = word_counts(x, 6);
    CHECK(c6.distinct() == 1);
    CHECK(c6.total() == 1);
    CHECK_THROWS_AS(word_counts(x, 7), ArgumentError);
    CHECK_THROWS_AS(word_counts(x, 0), ArgumentError);
}

TEST_CASE("context totals are successor sums") {
    const auto c2 = word_counts(bin("000100"), 2);
    CHECK(context_total(c2, std::vector<Symbol>{0}) == 4);
    CHECK(context_total(c2, std::vector<Symbol>{1}) == 1);
    CHECK(context_total(word_counts(bin("0000"), 2), std::vector<Symbol>{1}) == 0);
    CHECK_THROWS_AS(context_total(c2, std::vector<Symbol>{0, 0}), ArgumentError);
}

TEST_CASE("count sums and boundary effect, exhaustive for t <= 10, n <= 3") {
    for (std::size_t n : {2, 3}) {
        const auto alphabet = n == 2 ? Alphabet::binary() : Alphabet::chars("012");
        for (std::size_t t = 1; t <= (n == 2 ? 10u : 6u); ++t) {
            for (const auto& w : oracle::all_words(n, t)) {
                const auto x = parse_sequence(w, alphabet);
                for (std::size_t len = 1; len <= t; ++len) {
                    const auto c = word_counts(x, len);
                    std::uint64_t sum = 0;
                    c.for_each([&](WordKey, std::uint64_t v) { sum += v; });
                    CHECK(sum == t - len + 1);
                    if (len == t) continue;
                    const auto next = word_counts(x, len + 1);
                    for (WordKey v = 0; v < *checked_power(n, len); ++v) {
                        const auto ctx = context_total(next, v);
                        const auto own = c.count(v);
                        REQUIRE(ctx <= own);
                        REQUIRE(own - ctx <= 1);
                    }
                }
            }
        }
    }
}

TEST_CASE("sparse counts agree with a string oracle") {
    std::mt19937 gen(11);
    std::vector<Symbol> v(3000);
    for (auto& x : v) x = static_cast<Symbol>(gen() % 256);
    const Sequence s(Alphabet::bytes(), v);
    const auto c = word_counts(s, 4);  // 256^4 > 2^24, sparse path
    std::map<std::vector<Symbol>, std::uint64_t> ref;
    for (std::size_t i = 0; i + 4 <= v.size(); ++i) ++ref[{v.begin() + i, v.begin() + i + 4}];
    CHECK(c.distinct() == ref.size());
    for (const auto& [w, cnt] : ref) REQUIRE(c.count(w) == cnt);
    CHECK(c.count(std::vector<Symbol>{1, 2, 3, 4}) == ref[{1, 2, 3, 4}]);
    WordKey prev = 0;
    bool first = true, ordered = true;
    c.for_each([&](WordKey k, std::uint64_t) {
        if (!first && k <= prev) ordered = false;
        prev = k;
        first = false;
    });
    CHECK(ordered);
}

TEST_CASE("word keys") {
    CHECK(word_key(std::vector<Symbol>{1, 0, 1}, 2) == 5);
    CHECK(word_from_key(5, 2, 3) == std::vector<Symbol>{1, 0, 1});
    CHECK(checked_power(2, 64) == std::nullopt);
    CHECK(checked_power(3, 2) == 9u);
}
