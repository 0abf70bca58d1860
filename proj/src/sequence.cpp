#include "entropytest/sequence.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <sstream>

#include "entropytest/error.hpp"

namespace entropytest {

namespace {

constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 24;

std::string describe_symbol(unsigned char c) {
    if (c >= 0x20 && c < 0x7f) return std::string("'") + static_cast<char>(c) + "'";
    std::ostringstream os;
    os << "byte 0x" << std::hex << static_cast<int>(c);
    return os.str();
}

}  // namespace

Alphabet::Alphabet(Kind kind, std::vector<unsigned char> symbols)
    : kind_(kind), symbols_(std::move(symbols)) {
    if (symbols_.size() < 2) throw ArgumentError("alphabet needs at least two symbols");
    index_.fill(-1);
    for (std::size_t i = 0; i < symbols_.size(); ++i) {
        auto& slot = index_[symbols_[i]];
        if (slot != -1)
            throw ArgumentError("duplicate alphabet symbol " + describe_symbol(symbols_[i]));
        slot = static_cast<std::int16_t>(i);
    }
}

Alphabet Alphabet::binary() { return Alphabet(Kind::Binary, {'0', '1'}); }

Alphabet Alphabet::bytes() {
    std::vector<unsigned char> all(256);
    for (int i = 0; i < 256; ++i) all[i] = static_cast<unsigned char>(i);
    return Alphabet(Kind::Byte, std::move(all));
}

Alphabet Alphabet::chars(std::string_view symbols) {
    std::vector<unsigned char> list(symbols.begin(), symbols.end());
    for (unsigned char c : list)
        if (c == '\n' || c == '\r')
            throw ArgumentError("line separators cannot be alphabet symbols");
    return Alphabet(Kind::Chars, std::move(list));
}

Alphabet Alphabet::parse(std::string_view spec) {
    if (spec == "binary") return binary();
    if (spec == "byte") return bytes();
    constexpr std::string_view prefix = "chars:";
    if (spec.starts_with(prefix)) return chars(spec.substr(prefix.size()));
    throw ArgumentError("unknown alphabet spec '" + std::string(spec) +
                        "' (expected binary, byte or chars:<symbols>)");
}

std::optional<Symbol> Alphabet::index_of(unsigned char c) const noexcept {
    const auto i = index_[c];
    if (i < 0) return std::nullopt;
    return static_cast<Symbol>(i);
}

std::string Alphabet::spec() const {
    switch (kind_) {
        case Kind::Binary: return "binary";
        case Kind::Byte: return "byte";
        case Kind::Chars: break;
    }
    return "chars:" + std::string(symbols_.begin(), symbols_.end());
}

unsigned Alphabet::packed_width() const noexcept {
    unsigned w = 0;
    while ((std::size_t{1} << w) < symbols_.size()) ++w;
    return w;
}

Sequence::Sequence(Alphabet alphabet, std::vector<Symbol> data)
    : alphabet_(std::move(alphabet)), data_(std::move(data)) {
    const auto n = alphabet_.size();
    for (std::size_t i = 0; i < data_.size(); ++i)
        if (data_[i] >= n)
            throw ArgumentError("symbol index " + std::to_string(data_[i]) + " at position " +
                                std::to_string(i + 1) + " outside alphabet of size " +
                                std::to_string(n));
}

Sequence parse_sequence(std::string_view payload, const Alphabet& alphabet) {
    std::vector<Symbol> data;
    data.reserve(payload.size());
    const bool raw = alphabet.is_raw_bytes();
    for (std::size_t i = 0; i < payload.size(); ++i) {
        const auto c = static_cast<unsigned char>(payload[i]);
        if (!raw && (c == '\n' || c == '\r')) continue;
        const auto idx = alphabet.index_of(c);
        if (!idx)
            throw ParseError("symbol " + describe_symbol(c) + " at position " +
                                 std::to_string(i + 1) + " is not in alphabet " + alphabet.spec(),
                             i + 1);
        data.push_back(*idx);
    }
    if (data.empty()) throw ParseError("empty sequence payload", 0);
    return Sequence(alphabet, std::move(data));
}

std::string render(const Sequence& seq) {
    std::string out;
    out.reserve(seq.size());
    for (Symbol s : seq.symbols()) out.push_back(static_cast<char>(seq.alphabet().symbol(s)));
    return out;
}

Sequence read_sequence_file(const std::filesystem::path& path, const Alphabet& alphabet) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ArgumentError("cannot open sequence file " + path.string());
    std::string payload((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_sequence(payload, alphabet);
}

void write_sequence_file(const std::filesystem::path& path, const Sequence& seq) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ArgumentError("cannot write sequence file " + path.string());
    const auto text = render(seq);
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!seq.alphabet().is_raw_bytes()) out.put('\n');
}

std::optional<std::uint64_t> checked_power(std::size_t n, std::size_t len) noexcept {
    std::uint64_t p = 1;
    for (std::size_t i = 0; i < len; ++i) {
        if (p > UINT64_MAX / n) return std::nullopt;
        p *= n;
    }
    return p;
}

WordKey word_key(std::span<const Symbol> word, std::size_t alphabet_size) {
    if (!checked_power(alphabet_size, word.size()))
        throw CapacityError("word of length " + std::to_string(word.size()) +
                            " does not fit a 64-bit key");
    WordKey key = 0;
    for (Symbol s : word) key = key * alphabet_size + s;
    return key;
}

std::vector<Symbol> word_from_key(WordKey key, std::size_t alphabet_size, std::size_t length) {
    std::vector<Symbol> word(length);
    for (std::size_t i = length; i-- > 0;) {
        word[i] = static_cast<Symbol>(key % alphabet_size);
        key /= alphabet_size;
    }
    return word;
}

NGramCounts::NGramCounts(const Sequence& seq, std::size_t word_length)
    : word_length_(word_length), sequence_length_(seq.size()), alphabet_size_(seq.alphabet().size()) {
    if (word_length < 1 || word_length > seq.size())
        throw ArgumentError("word length " + std::to_string(word_length) +
                            " must lie in [1, " + std::to_string(seq.size()) + "]");
    const auto space = checked_power(alphabet_size_, word_length);
    if (!space)
        throw CapacityError("words of length " + std::to_string(word_length) +
                            " over " + std::to_string(alphabet_size_) +
                            " symbols do not fit a 64-bit key");
    const std::uint64_t modulus = *space;
    dense_ = modulus <= kDenseLimit;

    const auto x = seq.symbols();
    WordKey key = 0;
    for (std::size_t i = 0; i + 1 < word_length; ++i) key = key * alphabet_size_ + x[i];

    if (dense_) {
        dense_counts_.assign(modulus, 0);
        for (std::size_t i = word_length - 1; i < x.size(); ++i) {
            key = (key * alphabet_size_ + x[i]) % modulus;
            ++dense_counts_[key];
        }
        return;
    }

    std::vector<WordKey> keys;
    keys.reserve(x.size() - word_length + 1);
    for (std::size_t i = word_length - 1; i < x.size(); ++i) {
        key = (key % (modulus / alphabet_size_)) * alphabet_size_ + x[i];
        keys.push_back(key);
    }
    std::sort(keys.begin(), keys.end());
    for (std::size_t i = 0; i < keys.size();) {
        std::size_t j = i;
        while (j < keys.size() && keys[j] == keys[i]) ++j;
        sparse_counts_.emplace_back(keys[i], j - i);
        i = j;
    }
}

std::uint64_t NGramCounts::count(WordKey word) const {
    if (dense_) return word < dense_counts_.size() ? dense_counts_[word] : 0;
    auto it = std::lower_bound(sparse_counts_.begin(), sparse_counts_.end(), word,
                               [](const auto& e, WordKey k) { return e.first < k; });
    return (it != sparse_counts_.end() && it->first == word) ? it->second : 0;
}

std::uint64_t NGramCounts::count(std::span<const Symbol> word) const {
    if (word.size() != word_length_)
        throw ArgumentError("word length " + std::to_string(word.size()) +
                            " does not match counts of length " + std::to_string(word_length_));
    for (Symbol s : word)
        if (s >= alphabet_size_) throw ArgumentError("word symbol outside alphabet");
    return count(word_key(word, alphabet_size_));
}

std::size_t NGramCounts::distinct() const noexcept {
    if (!dense_) return sparse_counts_.size();
    return static_cast<std::size_t>(
        std::count_if(dense_counts_.begin(), dense_counts_.end(), [](auto c) { return c != 0; }));
}

std::uint64_t context_total(const NGramCounts& successor_counts, WordKey context) {
    const auto n = successor_counts.alphabet_size();
    std::uint64_t total = 0;
    for (std::size_t a = 0; a < n; ++a) total += successor_counts.count(context * n + a);
    return total;
}

std::uint64_t context_total(const NGramCounts& successor_counts, std::span<const Symbol> context) {
    if (context.size() + 1 != successor_counts.word_length())
        throw ArgumentError("context of length " + std::to_string(context.size()) +
                            " needs counts of length " + std::to_string(context.size() + 1) +
                            ", got " + std::to_string(successor_counts.word_length()));
    return context_total(successor_counts, word_key(context, successor_counts.alphabet_size()));
}

}  // namespace entropytest
