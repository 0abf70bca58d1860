#include "entropytest/sources.hpp"

#include <cmath>
#include <fstream>
#include <numeric>
#include <queue>

#include "entropytest/error.hpp"

namespace entropytest {

namespace {

constexpr double kRowTolerance = 1e-9;
constexpr double kStationaryTolerance = 1e-12;
constexpr std::size_t kStationaryMaxSweeps = 1'000'000;
constexpr std::uint64_t kMarkovTableLimit = std::uint64_t{1} << 24;

// Validates one probability row and rescales it to sum exactly to 1.
void normalize_row(std::span<double> row, const std::string& what) {
    double sum = 0.0;
    for (double p : row) {
        if (!(p >= 0.0) || !std::isfinite(p))
            throw ModelError(what + ": probabilities must be finite and nonnegative");
        sum += p;
    }
    if (std::abs(sum - 1.0) > kRowTolerance)
        throw ModelError(what + ": row sums to " + std::to_string(sum) + ", expected 1");
    for (double& p : row) p /= sum;
}

void normalize_rows(std::vector<double>& table, std::size_t width, const std::string& what) {
    for (std::size_t r = 0; r * width < table.size(); ++r)
        normalize_row(std::span<double>(table).subspan(r * width, width),
                      what + " row " + std::to_string(r));
}

double total_variation(std::span<const double> a, std::span<const double> b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d += std::abs(a[i] - b[i]);
    return 0.5 * d;
}

// Checks irreducibility and aperiodicity of the chain whose positive edges are
// enumerated by `edges(u, visit)`, visit(v) per successor v.
template <class Edges>
void check_ergodic(std::size_t states, Edges&& edges) {
    if (states == 1) return;
    auto reach = [&](bool reverse) {
        std::vector<std::vector<std::size_t>> radj;
        if (reverse) {
            radj.resize(states);
            for (std::size_t u = 0; u < states; ++u) edges(u, [&](std::size_t v) { radj[v].push_back(u); });
        }
        std::vector<long> level(states, -1);
        std::queue<std::size_t> q;
        level[0] = 0;
        q.push(0);
        while (!q.empty()) {
            auto u = q.front();
            q.pop();
            auto visit = [&](std::size_t v) {
                if (level[v] < 0) {
                    level[v] = level[u] + 1;
                    q.push(v);
                }
            };
            if (reverse)
                for (auto v : radj[u]) visit(v);
            else
                edges(u, visit);
        }
        return level;
    };
    const auto level = reach(false);
    for (auto l : level)
        if (l < 0) throw ModelError("chain is reducible: not every state is reachable");
    for (auto l : reach(true))
        if (l < 0) throw ModelError("chain is reducible: not every state reaches the start");
    long period = 0;
    for (std::size_t u = 0; u < states; ++u)
        edges(u, [&](std::size_t v) { period = std::gcd(period, std::abs(level[u] + 1 - level[v])); });
    if (period != 1) throw ModelError("chain is periodic with period " + std::to_string(period));
}

// Power iteration; `step(from, to)` applies one transition sweep.
template <class Step>
std::vector<double> power_iterate(std::size_t states, Step&& step) {
    std::vector<double> pi(states, 1.0 / static_cast<double>(states));
    std::vector<double> next(states);
    for (std::size_t sweep = 0; sweep < kStationaryMaxSweeps; ++sweep) {
        std::fill(next.begin(), next.end(), 0.0);
        step(pi, next);
        const double s = std::accumulate(next.begin(), next.end(), 0.0);
        for (double& p : next) p /= s;
        const double tv = total_variation(pi, next);
        pi.swap(next);
        if (tv <= kStationaryTolerance) return pi;
    }
    throw ModelError("stationary distribution did not converge");
}

std::vector<double> markov_stationary(std::size_t n, const MarkovParams& m) {
    const auto states = *checked_power(n, m.order);
    if (states == 1) return {1.0};
    const auto& P = m.transitions;
    check_ergodic(states, [&](std::size_t u, auto&& visit) {
        for (std::size_t a = 0; a < n; ++a)
            if (P[u * n + a] > 0.0) visit((u * n + a) % states);
    });
    return power_iterate(states, [&](const std::vector<double>& from, std::vector<double>& to) {
        for (std::size_t u = 0; u < states; ++u) {
            if (from[u] == 0.0) continue;
            for (std::size_t a = 0; a < n; ++a) to[(u * n + a) % states] += from[u] * P[u * n + a];
        }
    });
}

}  // namespace

std::vector<double> stationary_of_matrix(std::size_t states, std::span<const double> matrix) {
    if (states == 0 || matrix.size() != states * states)
        throw ArgumentError("transition matrix must be square and nonempty");
    check_ergodic(states, [&](std::size_t u, auto&& visit) {
        for (std::size_t v = 0; v < states; ++v)
            if (matrix[u * states + v] > 0.0) visit(v);
    });
    return power_iterate(states, [&](const std::vector<double>& from, std::vector<double>& to) {
        for (std::size_t u = 0; u < states; ++u)
            for (std::size_t v = 0; v < states; ++v) to[v] += from[u] * matrix[u * states + v];
    });
}

struct SourceModel::Impl {
    Alphabet alphabet;
    SourceParams params;
    bool stationary_start = true;
    // Markov only: prefix_mass[j][w] = P(x_1 ... x_j = w), j = 0 ... order.
    std::vector<std::vector<double>> prefix_mass;
};

SourceModel::SourceModel(std::shared_ptr<const Impl> impl) : impl_(std::move(impl)) {}

SourceModel SourceModel::bernoulli(Alphabet alphabet, std::vector<double> probabilities) {
    if (probabilities.size() != alphabet.size())
        throw ModelError("Bernoulli source needs " + std::to_string(alphabet.size()) +
                         " probabilities, got " + std::to_string(probabilities.size()));
    normalize_row(probabilities, "Bernoulli probabilities");
    auto impl = std::make_shared<Impl>(Impl{std::move(alphabet), {}, true, {}});
    impl->params = BernoulliParams{std::move(probabilities)};
    return SourceModel(std::move(impl));
}

SourceModel SourceModel::markov(Alphabet alphabet, std::size_t order, std::vector<double> transitions,
                                std::vector<double> initial) {
    const auto n = alphabet.size();
    const auto rows_bound = checked_power(n, order + 1);
    if (!rows_bound || *rows_bound > kMarkovTableLimit)
        throw CapacityError("Markov source of order " + std::to_string(order) + " over " +
                            std::to_string(n) + " symbols exceeds the 2^24 transition table limit");
    const auto states = *rows_bound / n;
    if (transitions.size() != states * n)
        throw ModelError("Markov order " + std::to_string(order) + " needs " +
                         std::to_string(states * n) + " transition entries, got " +
                         std::to_string(transitions.size()));
    normalize_rows(transitions, n, "transition");

    MarkovParams params{order, std::move(transitions), {}};
    bool stationary_start = true;
    if (initial.empty()) {
        params.initial = markov_stationary(n, params);
    } else {
        if (initial.size() != states)
            throw ModelError("initial distribution needs " + std::to_string(states) + " entries");
        normalize_row(initial, "initial distribution");
        params.initial = std::move(initial);
        try {
            stationary_start =
                total_variation(params.initial, markov_stationary(n, params)) <= kRowTolerance;
        } catch (const ModelError&) {
            stationary_start = false;
        }
    }

    auto impl = std::make_shared<Impl>(Impl{std::move(alphabet), {}, true, {}});
    impl->stationary_start = stationary_start;
    impl->prefix_mass.resize(order + 1);
    impl->prefix_mass[order] = params.initial;
    for (std::size_t j = order; j-- > 0;) {
        auto& coarse = impl->prefix_mass[j];
        const auto& fine = impl->prefix_mass[j + 1];
        coarse.assign(fine.size() / n, 0.0);
        for (std::size_t w = 0; w < fine.size(); ++w) coarse[w / n] += fine[w];
    }
    impl->params = std::move(params);
    return SourceModel(std::move(impl));
}

SourceModel SourceModel::hidden_markov(Alphabet alphabet, std::size_t states,
                                       std::vector<double> transition, std::vector<double> emission,
                                       std::vector<double> initial) {
    const auto n = alphabet.size();
    if (states == 0) throw ModelError("hidden-Markov source needs at least one state");
    if (transition.size() != states * states)
        throw ModelError("hidden transition matrix must be " + std::to_string(states) + "x" +
                         std::to_string(states));
    if (emission.size() != states * n)
        throw ModelError("emission matrix must be " + std::to_string(states) + "x" +
                         std::to_string(n));
    normalize_rows(transition, states, "hidden transition");
    normalize_rows(emission, n, "emission");

    bool stationary_start = true;
    if (initial.empty()) {
        initial = stationary_of_matrix(states, transition);
    } else {
        if (initial.size() != states)
            throw ModelError("initial state distribution needs " + std::to_string(states) + " entries");
        normalize_row(initial, "initial state distribution");
        try {
            stationary_start =
                total_variation(initial, stationary_of_matrix(states, transition)) <= kRowTolerance;
        } catch (const ModelError&) {
            stationary_start = false;
        }
    }
    auto impl = std::make_shared<Impl>(Impl{std::move(alphabet), {}, true, {}});
    impl->stationary_start = stationary_start;
    impl->params = HiddenMarkovParams{states, std::move(transition), std::move(emission), std::move(initial)};
    return SourceModel(std::move(impl));
}

const Alphabet& SourceModel::alphabet() const noexcept { return impl_->alphabet; }
const SourceParams& SourceModel::params() const noexcept { return impl_->params; }
bool SourceModel::is_bernoulli() const noexcept { return std::holds_alternative<BernoulliParams>(impl_->params); }
bool SourceModel::is_markov() const noexcept { return std::holds_alternative<MarkovParams>(impl_->params); }
bool SourceModel::is_hidden_markov() const noexcept {
    return std::holds_alternative<HiddenMarkovParams>(impl_->params);
}
bool SourceModel::stationary_start() const noexcept { return impl_->stationary_start; }

std::optional<std::size_t> SourceModel::order() const noexcept {
    if (is_bernoulli()) return 0;
    if (const auto* m = std::get_if<MarkovParams>(&impl_->params)) return m->order;
    return std::nullopt;
}

namespace {

// Trackers point into the model's parameters and hold the model alive.
using Owner = std::shared_ptr<const void>;

class BernoulliTracker final : public SourceTracker {
public:
    BernoulliTracker(Owner owner, const BernoulliParams& p) : owner_(std::move(owner)), p_(&p) {}
    void distribution(std::span<double> out) const override {
        std::copy(p_->probabilities.begin(), p_->probabilities.end(), out.begin());
    }
    double probability(Symbol a) const override { return p_->probabilities[a]; }
    void update(Symbol) override {}
    std::unique_ptr<SourceTracker> clone() const override { return std::make_unique<BernoulliTracker>(*this); }

private:
    Owner owner_;
    const BernoulliParams* p_;
};

class MarkovTracker final : public SourceTracker {
public:
    MarkovTracker(Owner owner, const MarkovParams& p, const std::vector<std::vector<double>>& prefix, std::size_t n)
        : owner_(std::move(owner)), p_(&p), prefix_(&prefix), n_(n), states_(prefix.back().size()) {}

    void distribution(std::span<double> out) const override {
        for (std::size_t a = 0; a < n_; ++a) out[a] = probability(static_cast<Symbol>(a));
    }

    double probability(Symbol a) const override {
        if (seen_ < p_->order) {
            const double denom = (*prefix_)[seen_][context_];
            return denom > 0.0 ? (*prefix_)[seen_ + 1][context_ * n_ + a] / denom : 0.0;
        }
        return p_->transitions[context_ * n_ + a];
    }

    void update(Symbol a) override {
        if (seen_ < p_->order) {
            context_ = context_ * n_ + a;
            ++seen_;
        } else {
            context_ = (context_ * n_ + a) % states_;
        }
    }

    std::unique_ptr<SourceTracker> clone() const override { return std::make_unique<MarkovTracker>(*this); }

private:
    Owner owner_;
    const MarkovParams* p_;
    const std::vector<std::vector<double>>* prefix_;
    std::size_t n_;
    std::size_t states_;
    std::size_t seen_ = 0;
    std::uint64_t context_ = 0;
};

// Scaled forward recursion: `predict_` is the law of the next hidden state
// given the letters seen so far.
class HiddenMarkovTracker final : public SourceTracker {
public:
    HiddenMarkovTracker(Owner owner, const HiddenMarkovParams& p, std::size_t n)
        : owner_(std::move(owner)), p_(&p), n_(n), predict_(p.initial), scratch_(p.states) {}

    void distribution(std::span<double> out) const override {
        for (std::size_t a = 0; a < n_; ++a) out[a] = probability(static_cast<Symbol>(a));
    }

    double probability(Symbol a) const override {
        double s = 0.0;
        for (std::size_t h = 0; h < p_->states; ++h) s += predict_[h] * p_->emission[h * n_ + a];
        return s;
    }

    void update(Symbol a) override {
        const auto S = p_->states;
        double norm = 0.0;
        for (std::size_t h = 0; h < S; ++h) {
            scratch_[h] = predict_[h] * p_->emission[h * n_ + a];
            norm += scratch_[h];
        }
        std::fill(predict_.begin(), predict_.end(), 0.0);
        if (norm == 0.0) return;
        for (std::size_t h = 0; h < S; ++h) {
            const double w = scratch_[h] / norm;
            if (w == 0.0) continue;
            for (std::size_t g = 0; g < S; ++g) predict_[g] += w * p_->transition[h * S + g];
        }
    }

    std::unique_ptr<SourceTracker> clone() const override {
        return std::make_unique<HiddenMarkovTracker>(*this);
    }

private:
    Owner owner_;
    const HiddenMarkovParams* p_;
    std::size_t n_;
    std::vector<double> predict_;
    std::vector<double> scratch_;
};

}  // namespace

std::unique_ptr<SourceTracker> SourceModel::tracker() const {
    const auto n = impl_->alphabet.size();
    return std::visit(
        [&](const auto& p) -> std::unique_ptr<SourceTracker> {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BernoulliParams>)
                return std::make_unique<BernoulliTracker>(impl_, p);
            else if constexpr (std::is_same_v<T, MarkovParams>)
                return std::make_unique<MarkovTracker>(impl_, p, impl_->prefix_mass, n);
            else
                return std::make_unique<HiddenMarkovTracker>(impl_, p, n);
        },
        impl_->params);
}

SourceModel SourceModel::as_markov(std::size_t k) const {
    const auto own = order();
    if (!own) throw ArgumentError("a hidden-Markov source has no finite-order Markov form");
    if (k < *own)
        throw ArgumentError("cannot express an order-" + std::to_string(*own) +
                            " source as order " + std::to_string(k));
    const auto n = alphabet().size();
    const auto rows_bound = checked_power(n, k + 1);
    if (!rows_bound || *rows_bound > kMarkovTableLimit)
        throw CapacityError("order-" + std::to_string(k) + " embedding exceeds the table limit");
    const auto states = *rows_bound / n;

    std::vector<double> transitions(states * n);
    std::vector<double> initial(states);
    std::vector<double> row(n);
    for (std::uint64_t w = 0; w < states; ++w) {
        auto tr = tracker();
        double mass = 1.0;
        for (Symbol s : word_from_key(w, n, k)) {
            mass *= tr->probability(s);
            tr->update(s);
        }
        initial[w] = mass;
        tr->distribution(row);
        std::copy(row.begin(), row.end(), transitions.begin() + static_cast<std::ptrdiff_t>(w * n));
    }
    auto result = markov(alphabet(), k, std::move(transitions), std::move(initial));
    if (!stationary_start()) {
        auto impl = std::make_shared<Impl>(*result.impl_);
        impl->stationary_start = false;
        return SourceModel(std::move(impl));
    }
    return result;
}

Sequence sample(const SourceModel& source, std::size_t t, SeededRng& rng) {
    if (t < 1) throw ArgumentError("sample length must be at least 1");
    const auto n = source.alphabet().size();
    auto tr = source.tracker();
    std::vector<double> dist(n);
    std::vector<Symbol> data(t);
    for (auto& x : data) {
        tr->distribution(dist);
        x = static_cast<Symbol>(rng.categorical(dist));
        tr->update(x);
    }
    return Sequence(source.alphabet(), std::move(data));
}

double log_probability(const SourceModel& source, std::span<const Symbol> word) {
    auto tr = source.tracker();
    double bits = 0.0;
    for (Symbol s : word) {
        const double p = tr->probability(s);
        if (p <= 0.0) return -std::numeric_limits<double>::infinity();
        bits += std::log2(p);
        tr->update(s);
    }
    return bits;
}

double log_probability(const SourceModel& source, const Sequence& seq) {
    if (!(seq.alphabet() == source.alphabet()))
        throw ArgumentError("sequence alphabet " + seq.alphabet().spec() +
                            " does not match source alphabet " + source.alphabet().spec());
    return log_probability(source, seq.symbols());
}

std::vector<double> stationary_distribution(const SourceModel& source) {
    if (source.is_bernoulli()) return {1.0};
    const auto* m = std::get_if<MarkovParams>(&source.params());
    if (!m) throw ArgumentError("stationary_distribution needs a Markov source; use hidden_stationary_distribution");
    return markov_stationary(source.alphabet().size(), *m);
}

std::vector<double> hidden_stationary_distribution(const SourceModel& source) {
    const auto* h = std::get_if<HiddenMarkovParams>(&source.params());
    if (!h) throw ArgumentError("source is not hidden-Markov");
    return stationary_of_matrix(h->states, h->transition);
}

// ---------------------------------------------------------------------------
// Source documents

namespace {

std::vector<double> json_row(const nlohmann::json& j, const std::string& what) {
    if (!j.is_array()) throw SpecError(what + " must be an array of numbers");
    std::vector<double> row;
    for (const auto& v : j) {
        if (!v.is_number()) throw SpecError(what + " must contain only numbers");
        row.push_back(v.get<double>());
    }
    return row;
}

std::vector<double> json_matrix(const nlohmann::json& j, std::size_t width, const std::string& what) {
    if (!j.is_array()) throw SpecError(what + " must be an array of rows");
    std::vector<double> flat;
    for (std::size_t r = 0; r < j.size(); ++r) {
        auto row = json_row(j[r], what + " row " + std::to_string(r));
        if (row.size() != width)
            throw SpecError(what + " row " + std::to_string(r) + " must have " + std::to_string(width) + " entries");
        flat.insert(flat.end(), row.begin(), row.end());
    }
    return flat;
}

// Word-keyed table: either an array of rows in key order or an object keyed by
// the rendered context word.
std::vector<double> json_word_table(const nlohmann::json& j, const Alphabet& alphabet, std::size_t word_length,
                                    std::size_t width, const std::string& what) {
    const auto n = alphabet.size();
    const auto rows = *checked_power(n, word_length);
    if (j.is_array()) {
        if (width == 1) {
            auto flat = json_row(j, what);
            if (flat.size() != rows) throw SpecError(what + " must have " + std::to_string(rows) + " entries");
            return flat;
        }
        auto flat = json_matrix(j, width, what);
        if (flat.size() != rows * width) throw SpecError(what + " must have " + std::to_string(rows) + " rows");
        return flat;
    }
    if (!j.is_object()) throw SpecError(what + " must be an array or an object keyed by context");
    std::vector<double> flat(rows * width, 0.0);
    std::vector<bool> seen(rows, false);
    for (const auto& [key, value] : j.items()) {
        if (key.size() != word_length)
            throw SpecError(what + " key '" + key + "' must have length " + std::to_string(word_length));
        std::vector<Symbol> word;
        for (unsigned char c : key) {
            auto idx = alphabet.index_of(c);
            if (!idx) throw SpecError(what + " key '" + key + "' uses a symbol outside the alphabet");
            word.push_back(*idx);
        }
        const auto w = word_key(word, n);
        seen[w] = true;
        if (width == 1) {
            if (!value.is_number()) throw SpecError(what + " entry '" + key + "' must be a number");
            flat[w] = value.get<double>();
        } else {
            auto row = json_row(value, what + " '" + key + "'");
            if (row.size() != width)
                throw SpecError(what + " '" + key + "' must have " + std::to_string(width) + " entries");
            std::copy(row.begin(), row.end(), flat.begin() + static_cast<std::ptrdiff_t>(w * width));
        }
    }
    if (width > 1)
        for (std::size_t w = 0; w < rows; ++w)
            if (!seen[w]) throw SpecError(what + " does not cover every context of length " + std::to_string(word_length));
    return flat;
}

nlohmann::json rows_json(const std::vector<double>& flat, std::size_t width) {
    auto out = nlohmann::json::array();
    for (std::size_t r = 0; r * width < flat.size(); ++r)
        out.push_back(std::vector<double>(flat.begin() + static_cast<std::ptrdiff_t>(r * width),
                                          flat.begin() + static_cast<std::ptrdiff_t>((r + 1) * width)));
    return out;
}

}  // namespace

SourceModel source_from_json(const nlohmann::json& doc) {
    try {
        if (!doc.is_object()) throw SpecError("source document must be a JSON object");
        const auto variant = doc.at("variant").get<std::string>();
        const auto alphabet = Alphabet::parse(doc.at("alphabet").get<std::string>());
        const auto n = alphabet.size();
        if (variant == "bernoulli")
            return SourceModel::bernoulli(alphabet, json_row(doc.at("probabilities"), "probabilities"));
        if (variant == "markov") {
            const auto k = doc.at("order").get<std::size_t>();
            if (!checked_power(n, k + 1) || *checked_power(n, k + 1) > kMarkovTableLimit)
                throw SpecError("Markov order too large for the alphabet");
            auto transitions = json_word_table(doc.at("transitions"), alphabet, k, n, "transitions");
            std::vector<double> initial;
            if (doc.contains("initial")) initial = json_word_table(doc.at("initial"), alphabet, k, 1, "initial");
            return SourceModel::markov(alphabet, k, std::move(transitions), std::move(initial));
        }
        if (variant == "hidden_markov") {
            const auto s = doc.at("states").get<std::size_t>();
            auto transition = json_matrix(doc.at("transition"), s, "transition");
            auto emission = json_matrix(doc.at("emission"), n, "emission");
            std::vector<double> initial;
            if (doc.contains("initial")) initial = json_row(doc.at("initial"), "initial");
            return SourceModel::hidden_markov(alphabet, s, std::move(transition), std::move(emission),
                                              std::move(initial));
        }
        throw SpecError("unknown source variant '" + variant + "'");
    } catch (const nlohmann::json::exception& e) {
        throw SpecError(std::string("malformed source document: ") + e.what());
    } catch (const ModelError& e) {
        throw SpecError(std::string("invalid source: ") + e.what());
    } catch (const ArgumentError& e) {
        throw SpecError(std::string("invalid source: ") + e.what());
    }
}

SourceModel read_source_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw SpecError("cannot open source file " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw SpecError("source file " + path.string() + " is not valid JSON: " + e.what());
    }
    return source_from_json(doc);
}

nlohmann::json SourceModel::to_json() const {
    const auto n = alphabet().size();
    nlohmann::json doc;
    doc["alphabet"] = alphabet().spec();
    std::visit(
        [&](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, BernoulliParams>) {
                doc["variant"] = "bernoulli";
                doc["probabilities"] = p.probabilities;
            } else if constexpr (std::is_same_v<T, MarkovParams>) {
                doc["variant"] = "markov";
                doc["order"] = p.order;
                doc["transitions"] = rows_json(p.transitions, n);
                doc["initial"] = p.initial;
            } else {
                doc["variant"] = "hidden_markov";
                doc["states"] = p.states;
                doc["transition"] = rows_json(p.transition, p.states);
                doc["emission"] = rows_json(p.emission, n);
                doc["initial"] = p.initial;
            }
        },
        impl_->params);
    return doc;
}

}  // namespace entropytest
