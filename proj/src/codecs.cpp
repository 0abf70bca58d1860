#include "entropytest/codecs.hpp"

#include <cerrno>
#include <cmath>
#include <csignal>
#include <cstdlib>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <pthread.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include "entropytest/error.hpp"

namespace entropytest {

namespace {

constexpr std::uint64_t kBlockLimit = std::uint64_t{1} << 20;
constexpr std::size_t kStderrCap = 4096;
constexpr std::size_t kMinOutputCap = 64 * 1024;

std::uint64_t block_words(std::size_t n, std::size_t len) {
    const auto words = checked_power(n, len);
    if (!words || *words > kBlockLimit)
        throw CapacityError("block code over " + std::to_string(n) + "^" + std::to_string(len) +
                            " words exceeds the 2^20 guard");
    return *words;
}

class Fd {
public:
    Fd() = default;
    explicit Fd(int fd) : fd_(fd) {}
    Fd(Fd&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Fd& operator=(Fd&& o) noexcept {
        if (this != &o) {
            reset();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    ~Fd() { reset(); }
    int get() const noexcept { return fd_; }
    void reset() noexcept {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }

private:
    int fd_ = -1;
};

std::pair<Fd, Fd> make_pipe() {
    int fds[2];
    if (::pipe2(fds, O_CLOEXEC) != 0) throw CodecError(std::string("pipe failed: ") + std::strerror(errno));
    return {Fd(fds[0]), Fd(fds[1])};
}

// Blocks SIGPIPE on the calling thread for its lifetime and discards any
// SIGPIPE raised meanwhile, so a codec that exits early surfaces as EPIPE.
class SigpipeGuard {
public:
    SigpipeGuard() {
        sigemptyset(&pipe_);
        sigaddset(&pipe_, SIGPIPE);
        sigset_t pending;
        sigpending(&pending);
        was_pending_ = sigismember(&pending, SIGPIPE) == 1;
        pthread_sigmask(SIG_BLOCK, &pipe_, &old_);
    }
    ~SigpipeGuard() {
        if (!was_pending_) {
            const timespec zero{0, 0};
            while (sigtimedwait(&pipe_, nullptr, &zero) > 0) {
            }
        }
        pthread_sigmask(SIG_SETMASK, &old_, nullptr);
    }
    SigpipeGuard(const SigpipeGuard&) = delete;
    SigpipeGuard& operator=(const SigpipeGuard&) = delete;

private:
    sigset_t pipe_{};
    sigset_t old_{};
    bool was_pending_ = false;
};

std::vector<std::string> allowed_environment() {
    std::vector<std::string> env;
    for (const char* key : {"PATH", "HOME", "LANG", "LC_ALL", "TMPDIR"})
        if (const char* v = std::getenv(key)) env.push_back(std::string(key) + "=" + v);
    return env;
}

void kill_and_reap(pid_t pid) {
    ::kill(pid, SIGKILL);
    int status = 0;
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
}

}  // namespace

CodeLengthTable::CodeLengthTable(std::size_t alphabet_size, std::size_t block_length)
    : alphabet_size_(alphabet_size), block_length_(block_length) {
    if (alphabet_size < 2) throw ArgumentError("code alphabet needs at least two letters");
    if (block_length < 1) throw ArgumentError("block length must be at least 1");
    if (!checked_power(alphabet_size, block_length)) throw CapacityError("block length too large for word keys");
}

void CodeLengthTable::set(WordKey word, int bits) {
    if (bits < 1) throw ArgumentError("codeword lengths must be positive, got " + std::to_string(bits));
    if (word >= *checked_power(alphabet_size_, block_length_)) throw ArgumentError("word outside A^n");
    lengths_[word] = bits;
}

void CodeLengthTable::set(std::span<const Symbol> word, int bits) {
    if (word.size() != block_length_) throw ArgumentError("word length differs from block length");
    set(word_key(word, alphabet_size_), bits);
}

std::optional<int> CodeLengthTable::length(WordKey word) const {
    auto it = lengths_.find(word);
    if (it == lengths_.end()) return std::nullopt;
    return it->second;
}

std::optional<int> CodeLengthTable::length(std::span<const Symbol> word) const {
    if (word.size() != block_length_) throw ArgumentError("word length differs from block length");
    return length(word_key(word, alphabet_size_));
}

bool CodeLengthTable::complete() const { return lengths_.size() == *checked_power(alphabet_size_, block_length_); }

double kraft_sum(const CodeLengthTable& table) {
    if (table.size() == 0) throw ArgumentError("kraft_sum of an empty code table");
    double s = 0.0;
    for (const auto& [word, bits] : table.entries()) s += std::ldexp(1.0, -bits);
    return s;
}

BlockMeasure::BlockMeasure(std::size_t alphabet_size, std::size_t block_length, std::vector<double> log2_probabilities)
    : alphabet_size_(alphabet_size), block_length_(block_length), log2_probabilities_(std::move(log2_probabilities)) {}

double BlockMeasure::probability(WordKey word) const { return std::exp2(log2_probability(word)); }

double BlockMeasure::log2_probability(WordKey word) const {
    if (word >= log2_probabilities_.size()) throw ArgumentError("word outside A^n");
    return log2_probabilities_[word];
}

BlockMeasure code_to_measure(const CodeLengthTable& table) {
    const auto words = block_words(table.alphabet_size(), table.block_length());
    if (!table.complete())
        throw ArgumentError("code covers " + std::to_string(table.size()) + " of " + std::to_string(words) +
                            " words; a measure needs every word");
    const double kraft = kraft_sum(table);
    if (kraft > 1.0) throw ArgumentError("Kraft sum " + std::to_string(kraft) + " exceeds 1");
    const double log_kraft = std::log2(kraft);
    std::vector<double> logs(words);
    for (const auto& [word, bits] : table.entries()) logs[word] = -static_cast<double>(bits) - log_kraft;
    return BlockMeasure(table.alphabet_size(), table.block_length(), std::move(logs));
}

std::vector<std::uint8_t> pack_sequence(const Sequence& seq) {
    const auto x = seq.symbols();
    if (seq.alphabet().is_raw_bytes()) return {x.begin(), x.end()};
    const unsigned width = seq.alphabet().packed_width();
    std::vector<std::uint8_t> out((x.size() * width + 7) / 8, 0);
    std::size_t bit = 0;
    for (Symbol s : x) {
        for (unsigned b = width; b-- > 0; ++bit)
            if ((s >> b) & 1U) out[bit / 8] |= static_cast<std::uint8_t>(0x80U >> (bit % 8));
    }
    return out;
}

ProcessOutput run_filter(const std::string& command, std::span<const std::uint8_t> input,
                         std::chrono::milliseconds timeout, std::size_t output_cap) {
    auto [in_read, in_write] = make_pipe();
    auto [out_read, out_write] = make_pipe();
    auto [err_read, err_write] = make_pipe();

    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_read.get(), STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_write.get(), STDOUT_FILENO);
    posix_spawn_file_actions_adddup2(&actions, err_write.get(), STDERR_FILENO);

    std::string shell = "/bin/sh", dash_c = "-c", cmd = command;
    char* argv[] = {shell.data(), dash_c.data(), cmd.data(), nullptr};
    auto env_strings = allowed_environment();
    std::vector<char*> envp;
    for (auto& e : env_strings) envp.push_back(e.data());
    envp.push_back(nullptr);

    pid_t pid = 0;
    const int rc = posix_spawn(&pid, "/bin/sh", &actions, nullptr, argv, envp.data());
    posix_spawn_file_actions_destroy(&actions);
    if (rc != 0) throw CodecError("cannot start codec '" + command + "': " + std::strerror(rc));
    in_read.reset();
    out_write.reset();
    err_write.reset();

    SigpipeGuard sigpipe;
    ::fcntl(in_write.get(), F_SETFL, ::fcntl(in_write.get(), F_GETFL) | O_NONBLOCK);

    ProcessOutput result;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    std::size_t written = 0;
    if (input.empty()) in_write.reset();
    std::uint8_t buf[65536];

    while (out_read.get() >= 0 || err_read.get() >= 0) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (left.count() <= 0) {
            kill_and_reap(pid);
            throw CodecError("codec '" + command + "' timed out after " + std::to_string(timeout.count()) + " ms");
        }
        pollfd fds[3];
        nfds_t count = 0;
        int in_slot = -1, out_slot = -1, err_slot = -1;
        if (in_write.get() >= 0) {
            in_slot = static_cast<int>(count);
            fds[count++] = {in_write.get(), POLLOUT, 0};
        }
        if (out_read.get() >= 0) {
            out_slot = static_cast<int>(count);
            fds[count++] = {out_read.get(), POLLIN, 0};
        }
        if (err_read.get() >= 0) {
            err_slot = static_cast<int>(count);
            fds[count++] = {err_read.get(), POLLIN, 0};
        }
        const int ready = ::poll(fds, count, static_cast<int>(std::min<long long>(left.count(), 1000)));
        if (ready < 0) {
            if (errno == EINTR) continue;
            kill_and_reap(pid);
            throw CodecError(std::string("poll failed: ") + std::strerror(errno));
        }
        if (in_slot >= 0 && fds[in_slot].revents != 0) {
            const auto n = ::write(in_write.get(), input.data() + written, input.size() - written);
            if (n > 0) {
                written += static_cast<std::size_t>(n);
                if (written == input.size()) in_write.reset();
            } else if (n < 0 && errno != EAGAIN && errno != EINTR) {
                in_write.reset();  // reader went away; exit status tells the rest
            }
        }
        auto drain = [&](Fd& fd, int slot, auto&& sink) {
            if (slot < 0 || fds[slot].revents == 0) return;
            const auto n = ::read(fd.get(), buf, sizeof buf);
            if (n > 0) sink(static_cast<std::size_t>(n));
            else if (n == 0 || (errno != EAGAIN && errno != EINTR)) fd.reset();
        };
        drain(out_read, out_slot, [&](std::size_t n) {
            result.stdout_bytes.insert(result.stdout_bytes.end(), buf, buf + n);
            if (result.stdout_bytes.size() > output_cap) {
                kill_and_reap(pid);
                throw CodecError("codec '" + command + "' produced more than " + std::to_string(output_cap) +
                                 " bytes");
            }
        });
        drain(err_read, err_slot, [&](std::size_t n) {
            const auto room = kStderrCap - std::min(kStderrCap, result.stderr_text.size());
            result.stderr_text.append(reinterpret_cast<const char*>(buf), std::min(n, room));
        });
    }
    in_write.reset();

    int status = 0;
    while (::waitpid(pid, &status, 0) < 0) {
        if (errno != EINTR) throw CodecError(std::string("waitpid failed: ") + std::strerror(errno));
    }
    if (WIFEXITED(status)) result.exit_status = WEXITSTATUS(status);
    else result.exit_status = 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
    if (written < input.size() && result.exit_status == 0)
        throw CodecError("codec '" + command + "' exited before reading all input");
    return result;
}

std::uint64_t external_code_length(const ExternalCodec& codec, const Sequence& seq) {
    if (seq.empty()) throw ArgumentError("external_code_length needs a nonempty sequence");
    if (codec.command.empty()) throw ArgumentError("codec command is empty");
    const auto bytes = pack_sequence(seq);
    const auto cap = std::max(kMinOutputCap, 16 * bytes.size());
    auto out = run_filter(codec.command, bytes, codec.timeout, cap);
    if (out.exit_status != 0)
        throw CodecError("codec '" + codec.command + "' exited with status " + std::to_string(out.exit_status) +
                         (out.stderr_text.empty() ? std::string() : ": " + out.stderr_text));
    return 8 * static_cast<std::uint64_t>(out.stdout_bytes.size());
}

}  // namespace entropytest
