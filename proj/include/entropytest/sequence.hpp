#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace entropytest {

/// Index of a letter within its alphabet, in [0, n).
using Symbol = std::uint8_t;

/// A word over an n-letter alphabet packed as a base-n integer, oldest
/// letter most significant.
using WordKey = std::uint64_t;

/// Ordered set of n >= 2 distinct single-byte symbols.
class Alphabet {
public:
    enum class Kind { Binary, Byte, Chars };

    /// The characters '0' and '1'.
    static Alphabet binary();
    /// All 256 byte values; sequences over it are read and written raw.
    static Alphabet bytes();
    /// Explicit symbol list. Rejects duplicates, CR/LF and fewer than two symbols.
    static Alphabet chars(std::string_view symbols);
    /// Parses `binary`, `byte` or `chars:<symbols>`.
    static Alphabet parse(std::string_view spec);

    std::size_t size() const noexcept { return symbols_.size(); }
    Kind kind() const noexcept { return kind_; }
    bool is_raw_bytes() const noexcept { return kind_ == Kind::Byte; }

    unsigned char symbol(Symbol index) const { return symbols_.at(index); }
    std::optional<Symbol> index_of(unsigned char c) const noexcept;

    /// Round-trips through parse().
    std::string spec() const;

    /// Bits per symbol in the fixed-width packing, ceil(log2 n).
    unsigned packed_width() const noexcept;

    friend bool operator==(const Alphabet& a, const Alphabet& b) noexcept {
        return a.symbols_ == b.symbols_;
    }

private:
    Alphabet(Kind kind, std::vector<unsigned char> symbols);

    Kind kind_;
    std::vector<unsigned char> symbols_;
    std::array<std::int16_t, 256> index_{};
};

/// A finite sample x_1 ... x_t over an alphabet.
class Sequence {
public:
    /// Validates that every index lies in [0, n).
    Sequence(Alphabet alphabet, std::vector<Symbol> data);

    const Alphabet& alphabet() const noexcept { return alphabet_; }
    std::span<const Symbol> symbols() const noexcept { return data_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }
    Symbol operator[](std::size_t i) const { return data_[i]; }

    friend bool operator==(const Sequence&, const Sequence&) = default;

private:
    Alphabet alphabet_;
    std::vector<Symbol> data_;
};

/// Decodes a payload into a sequence. Text alphabets ignore CR and LF; the byte
/// alphabet takes the payload verbatim. Errors report 1-based payload offsets.
Sequence parse_sequence(std::string_view payload, const Alphabet& alphabet);

/// Inverse of parse_sequence: one character (or byte) per symbol, no separators.
std::string render(const Sequence& seq);

Sequence read_sequence_file(const std::filesystem::path& path, const Alphabet& alphabet);
void write_sequence_file(const std::filesystem::path& path, const Sequence& seq);

/// n^len, or nullopt when it exceeds 2^64 - 1. The special value 2^64 itself
/// (byte alphabet, len 8) is also reported as nullopt.
std::optional<std::uint64_t> checked_power(std::size_t n, std::size_t len) noexcept;

WordKey word_key(std::span<const Symbol> word, std::size_t alphabet_size);
std::vector<Symbol> word_from_key(WordKey key, std::size_t alphabet_size, std::size_t length);

/// Overlapping-window counts nu^t(v) of all words of one length.
///
/// Counts are dense when n^len <= 2^24 and otherwise a sorted run-length table
/// of the words that actually occur.
class NGramCounts {
public:
    NGramCounts(const Sequence& seq, std::size_t word_length);

    std::size_t word_length() const noexcept { return word_length_; }
    std::size_t sequence_length() const noexcept { return sequence_length_; }
    std::size_t alphabet_size() const noexcept { return alphabet_size_; }

    /// Number of windows, t - len + 1.
    std::uint64_t total() const noexcept { return sequence_length_ - word_length_ + 1; }

    std::uint64_t count(WordKey word) const;
    std::uint64_t count(std::span<const Symbol> word) const;

    /// Number of distinct words with nonzero count.
    std::size_t distinct() const noexcept;

    /// Visits (word, count) for every occurring word in ascending key order.
    template <class F>
    void for_each(F&& f) const {
        if (dense_) {
            for (std::size_t k = 0; k < dense_counts_.size(); ++k)
                if (dense_counts_[k] != 0) f(static_cast<WordKey>(k), dense_counts_[k]);
        } else {
            for (const auto& [key, c] : sparse_counts_) f(key, c);
        }
    }

private:
    std::size_t word_length_;
    std::size_t sequence_length_;
    std::size_t alphabet_size_;
    bool dense_;
    std::vector<std::uint64_t> dense_counts_;
    std::vector<std::pair<WordKey, std::uint64_t>> sparse_counts_;
};

inline NGramCounts word_counts(const Sequence& seq, std::size_t word_length) {
    return NGramCounts(seq, word_length);
}

/// nu-bar^t(v) = sum over a of nu^t(va), from counts of length |v| + 1.
/// This counts occurrences of v that have a successor, so it can be one less
/// than nu^t(v) when v ends the sequence.
std::uint64_t context_total(const NGramCounts& successor_counts, std::span<const Symbol> context);
std::uint64_t context_total(const NGramCounts& successor_counts, WordKey context);

}  // namespace entropytest
