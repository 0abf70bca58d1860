#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "entropytest/sequence.hpp"

namespace entropytest {

/// Codeword lengths (bits) of a block code on A^n, keyed by word.
class CodeLengthTable {
public:
    CodeLengthTable(std::size_t alphabet_size, std::size_t block_length);

    std::size_t alphabet_size() const noexcept { return alphabet_size_; }
    std::size_t block_length() const noexcept { return block_length_; }

    /// Lengths must be >= 1.
    void set(WordKey word, int bits);
    void set(std::span<const Symbol> word, int bits);

    std::optional<int> length(WordKey word) const;
    std::optional<int> length(std::span<const Symbol> word) const;

    std::size_t size() const noexcept { return lengths_.size(); }
    /// True when every word of A^n has a codeword.
    bool complete() const;

    const std::map<WordKey, int>& entries() const noexcept { return lengths_; }

private:
    std::size_t alphabet_size_;
    std::size_t block_length_;
    std::map<WordKey, int> lengths_;
};

/// sum_u 2^-len(u). A value <= 1 is necessary for unique decodability.
double kraft_sum(const CodeLengthTable& table);

/// Probability measure on A^n induced by a complete code,
/// mu(u) = 2^-len(u) / kraft_sum; -log2 mu(u) <= len(u) whenever the Kraft
/// sum is at most 1.
class BlockMeasure {
public:
    BlockMeasure(std::size_t alphabet_size, std::size_t block_length, std::vector<double> log2_probabilities);

    std::size_t alphabet_size() const noexcept { return alphabet_size_; }
    std::size_t block_length() const noexcept { return block_length_; }
    double probability(WordKey word) const;
    double log2_probability(WordKey word) const;

private:
    std::size_t alphabet_size_;
    std::size_t block_length_;
    std::vector<double> log2_probabilities_;
};

BlockMeasure code_to_measure(const CodeLengthTable& table);

/// An external compressor used as a code: raw bytes on stdin, compressed
/// bytes on stdout. The command runs through /bin/sh with an environment
/// reduced to PATH, HOME, LANG, LC_ALL and TMPDIR.
struct ExternalCodec {
    std::string command;
    std::chrono::milliseconds timeout{60'000};
};

/// Byte serialisation handed to external codecs: byte alphabets verbatim,
/// other alphabets packed at ceil(log2 n) bits per symbol, most significant
/// bit first, final byte zero-padded.
std::vector<std::uint8_t> pack_sequence(const Sequence& seq);

/// Length in bits (8 x compressed bytes, container headers included) of the
/// codec's output for `seq`. Throws CodecError on failure, timeout, or output
/// larger than max(16 x input, 64 KiB).
std::uint64_t external_code_length(const ExternalCodec& codec, const Sequence& seq);

/// Result of running a filter process to completion.
struct ProcessOutput {
    std::vector<std::uint8_t> stdout_bytes;
    std::string stderr_text;
    int exit_status = 0;
};

ProcessOutput run_filter(const std::string& command, std::span<const std::uint8_t> input,
                         std::chrono::milliseconds timeout, std::size_t output_cap);

}  // namespace entropytest
