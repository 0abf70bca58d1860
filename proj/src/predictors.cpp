#include "entropytest/predictors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "entropytest/error.hpp"

namespace entropytest {

namespace {

constexpr std::uint64_t kDenseLimit = std::uint64_t{1} << 24;
constexpr std::uint64_t kEnumerationLimit = std::uint64_t{1} << 20;

void check_alphabet(std::size_t n) {
    if (n < 2 || n > 256) throw ArgumentError("alphabet size must lie in [2, 256]");
}

// ---------------------------------------------------------------------------

class UniformPredictor final : public Predictor {
public:
    explicit UniformPredictor(std::size_t n) : Predictor(n) {}
    double probability(Symbol) const override { return 1.0 / static_cast<double>(alphabet_size()); }
    void update(Symbol) override {}
    std::unique_ptr<Predictor> clone() const override { return std::make_unique<UniformPredictor>(*this); }
};

class UniformMeasure final : public SequentialMeasure {
public:
    explicit UniformMeasure(std::size_t n) : n_(n) {}
    std::string name() const override { return "uniform"; }
    std::size_t alphabet_size() const override { return n_; }
    std::unique_ptr<Predictor> predictor() const override { return std::make_unique<UniformPredictor>(n_); }

private:
    std::size_t n_;
};

// ---------------------------------------------------------------------------

class LaplacePredictor final : public Predictor {
public:
    explicit LaplacePredictor(std::size_t n) : Predictor(n), counts_(n, 0) {}

    double probability(Symbol a) const override {
        return (static_cast<double>(counts_[a]) + 1.0) / static_cast<double>(seen_ + alphabet_size());
    }
    void update(Symbol a) override {
        ++counts_[a];
        ++seen_;
    }
    std::unique_ptr<Predictor> clone() const override { return std::make_unique<LaplacePredictor>(*this); }

private:
    std::vector<std::uint64_t> counts_;
    std::uint64_t seen_ = 0;
};

class LaplaceMeasure final : public SequentialMeasure {
public:
    explicit LaplaceMeasure(std::size_t n) : n_(n) {}
    std::string name() const override { return "laplace"; }
    std::size_t alphabet_size() const override { return n_; }
    std::unique_ptr<Predictor> predictor() const override { return std::make_unique<LaplacePredictor>(n_); }

private:
    std::size_t n_;
};

// ---------------------------------------------------------------------------

// Counts nu(ua) for contexts u of length k, dense when n^(k+1) is small.
class ContextCounts {
public:
    ContextCounts(std::size_t n, std::size_t k) : n_(n) {
        const auto cells = checked_power(n, k + 1);
        if (!cells) throw CapacityError("kt order " + std::to_string(k) + " too large for a 64-bit context key");
        dense_ = *cells <= kDenseLimit;
        if (dense_) {
            counts_.assign(*cells, 0);
            totals_.assign(*cells / n, 0);
        }
    }

    std::uint32_t count(std::uint64_t context, Symbol a) const {
        if (dense_) return counts_[context * n_ + a];
        auto it = sparse_.find(context * n_ + a);
        return it == sparse_.end() ? 0 : it->second;
    }
    std::uint32_t total(std::uint64_t context) const {
        if (dense_) return totals_[context];
        auto it = sparse_totals_.find(context);
        return it == sparse_totals_.end() ? 0 : it->second;
    }
    void add(std::uint64_t context, Symbol a) {
        if (dense_) {
            ++counts_[context * n_ + a];
            ++totals_[context];
        } else {
            ++sparse_[context * n_ + a];
            ++sparse_totals_[context];
        }
    }

private:
    std::size_t n_;
    bool dense_ = true;
    std::vector<std::uint32_t> counts_;
    std::vector<std::uint32_t> totals_;
    std::unordered_map<std::uint64_t, std::uint32_t> sparse_;
    std::unordered_map<std::uint64_t, std::uint32_t> sparse_totals_;
};

class KtPredictor final : public Predictor {
public:
    KtPredictor(std::size_t n, std::size_t k)
        : Predictor(n),
          order_(k),
          modulus_(k == 0 ? 1 : *checked_power(n, k)),
          counts_(std::make_shared<ContextCounts>(n, k)) {}

    double probability(Symbol a) const override {
        const auto n = static_cast<double>(alphabet_size());
        if (seen_ < order_) return 1.0 / n;
        return (static_cast<double>(counts_->count(context_, a)) + 0.5) /
               (static_cast<double>(counts_->total(context_)) + 0.5 * n);
    }

    void update(Symbol a) override {
        if (seen_ >= order_) mutable_counts().add(context_, a);
        else ++seen_;
        if (order_ > 0) context_ = (context_ * alphabet_size() + a) % modulus_;
    }

    std::unique_ptr<Predictor> clone() const override { return std::make_unique<KtPredictor>(*this); }

private:
    // Copy-on-write: clones made during exhaustive enumeration share the table
    // until one of them writes.
    ContextCounts& mutable_counts() {
        if (counts_.use_count() > 1) counts_ = std::make_shared<ContextCounts>(*counts_);
        return *counts_;
    }

    std::size_t order_;
    std::uint64_t modulus_;
    std::uint64_t context_ = 0;
    std::size_t seen_ = 0;
    std::shared_ptr<ContextCounts> counts_;
};

class KtMeasure final : public SequentialMeasure {
public:
    KtMeasure(std::size_t n, std::size_t k) : n_(n), k_(k) {
        if (!checked_power(n, k + 1))
            throw CapacityError("kt order " + std::to_string(k) + " too large for a 64-bit context key");
    }
    std::string name() const override { return "kt:" + std::to_string(k_); }
    std::size_t alphabet_size() const override { return n_; }
    std::unique_ptr<Predictor> predictor() const override { return std::make_unique<KtPredictor>(n_, k_); }

private:
    std::size_t n_;
    std::size_t k_;
};

// ---------------------------------------------------------------------------

double log2_sum_exp2(std::span<const double> xs) {
    const double top = *std::max_element(xs.begin(), xs.end());
    if (top == -std::numeric_limits<double>::infinity()) return top;
    double s = 0.0;
    for (double x : xs) s += std::exp2(x - top);
    return top + std::log2(s);
}

// Posterior log2-weights are kept normalised (log2-sum-exp2 = 0) after every
// update, so each step's log probability is the normaliser itself.
class MixturePredictor final : public Predictor {
public:
    MixturePredictor(std::size_t n, std::vector<std::unique_ptr<Predictor>> parts, std::vector<double> log_weights)
        : Predictor(n), parts_(std::move(parts)), log_weights_(std::move(log_weights)), scratch_(parts_.size()) {}

    MixturePredictor(const MixturePredictor& other)
        : Predictor(other), log_weights_(other.log_weights_), scratch_(other.scratch_) {
        parts_.reserve(other.parts_.size());
        for (const auto& p : other.parts_) parts_.push_back(p->clone());
    }

    double probability(Symbol a) const override {
        double p = 0.0;
        for (std::size_t j = 0; j < parts_.size(); ++j) p += std::exp2(log_weights_[j]) * parts_[j]->probability(a);
        return p;
    }

    void update(Symbol a) override { consume(a); }

    double consume(Symbol a) override {
        for (std::size_t j = 0; j < parts_.size(); ++j)
            scratch_[j] = log_weights_[j] + std::log2(parts_[j]->probability(a));
        const double step = log2_sum_exp2(scratch_);
        for (std::size_t j = 0; j < parts_.size(); ++j) {
            log_weights_[j] = scratch_[j] - step;
            parts_[j]->update(a);
        }
        return step;
    }

    std::unique_ptr<Predictor> clone() const override { return std::make_unique<MixturePredictor>(*this); }

private:
    std::vector<std::unique_ptr<Predictor>> parts_;
    std::vector<double> log_weights_;
    std::vector<double> scratch_;
};

class MixtureMeasure final : public SequentialMeasure {
public:
    MixtureMeasure(std::vector<MeasurePtr> parts, std::vector<double> weights, std::string name)
        : parts_(std::move(parts)), weights_(std::move(weights)), name_(std::move(name)) {}

    std::string name() const override { return name_; }
    std::size_t alphabet_size() const override { return parts_.front()->alphabet_size(); }

    std::unique_ptr<Predictor> predictor() const override {
        std::vector<std::unique_ptr<Predictor>> ps;
        std::vector<double> lw;
        for (std::size_t j = 0; j < parts_.size(); ++j) {
            ps.push_back(parts_[j]->predictor());
            lw.push_back(std::log2(weights_[j]));
        }
        return std::make_unique<MixturePredictor>(alphabet_size(), std::move(ps), std::move(lw));
    }

private:
    std::vector<MeasurePtr> parts_;
    std::vector<double> weights_;
    std::string name_;
};

MeasurePtr make_mixture(std::vector<MeasurePtr> components, std::vector<double> weights, std::string name) {
    if (components.empty()) throw ArgumentError("mixture needs at least one component");
    if (components.size() != weights.size()) throw ArgumentError("mixture needs one weight per component");
    for (const auto& c : components)
        if (!c) throw ArgumentError("mixture component is null");
    const auto n = components.front()->alphabet_size();
    for (const auto& c : components)
        if (c->alphabet_size() != n) throw ArgumentError("mixture components disagree on alphabet size");
    double sum = 0.0;
    for (double w : weights) {
        if (!(w > 0.0) || !std::isfinite(w)) throw ArgumentError("mixture weights must be positive");
        sum += w;
    }
    if (std::abs(sum - 1.0) > 1e-12) throw ArgumentError("mixture weights must sum to 1");
    return std::make_shared<MixtureMeasure>(std::move(components), std::move(weights), std::move(name));
}

std::size_t parse_order(std::string_view text, std::string_view spec) {
    std::size_t value = 0;
    const auto* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, value);
    if (ec != std::errc{} || ptr != end || text.empty())
        throw ArgumentError("invalid order in measure spec '" + std::string(spec) + "'");
    return value;
}

// Depth-first enumeration of A^depth weighted by the source law, with
// source and predictor states cloned down each branch.
template <class Visit>
void walk(const SourceTracker& src, const Predictor& pred, std::size_t n, std::size_t depth, std::size_t d,
          double log_p, double log_sigma, Visit& visit) {
    visit(d, src, pred, log_p, log_sigma);
    if (d == depth) return;
    std::vector<double> probs(n);
    src.distribution(probs);
    for (std::size_t a = 0; a < n; ++a) {
        if (probs[a] <= 0.0) continue;
        const auto s = static_cast<Symbol>(a);
        auto src_next = src.clone();
        auto pred_next = pred.clone();
        const double q = pred_next->consume(s);
        src_next->update(s);
        walk(*src_next, *pred_next, n, depth, d + 1, log_p + std::log2(probs[a]), log_sigma + q, visit);
    }
}

void guard(std::size_t n, std::size_t t) {
    const auto words = checked_power(n, t);
    if (!words || *words > kEnumerationLimit)
        throw CapacityError("enumerating " + std::to_string(n) + "^" + std::to_string(t) +
                            " sequences exceeds the 2^20 guard");
}

void check_pair(const SourceModel& source, const SequentialMeasure& measure) {
    if (source.alphabet().size() != measure.alphabet_size())
        throw ArgumentError("source and measure disagree on alphabet size");
}

}  // namespace

void Predictor::distribution(std::span<double> out) const {
    for (std::size_t a = 0; a < n_; ++a) out[a] = probability(static_cast<Symbol>(a));
}

double Predictor::consume(Symbol a) {
    const double p = probability(a);
    update(a);
    return std::log2(p);
}

MeasurePtr uniform_measure(std::size_t alphabet_size) {
    check_alphabet(alphabet_size);
    return std::make_shared<UniformMeasure>(alphabet_size);
}

MeasurePtr laplace_measure(std::size_t alphabet_size) {
    check_alphabet(alphabet_size);
    return std::make_shared<LaplaceMeasure>(alphabet_size);
}

MeasurePtr kt_measure(std::size_t alphabet_size, std::size_t order) {
    check_alphabet(alphabet_size);
    return std::make_shared<KtMeasure>(alphabet_size, order);
}

MeasurePtr mixture_measure(std::vector<MeasurePtr> components, std::vector<double> weights) {
    std::string name = "mixture(";
    for (std::size_t j = 0; j < components.size(); ++j) {
        if (j) name += ",";
        name += components[j] ? components[j]->name() : "null";
    }
    name += ")";
    return make_mixture(std::move(components), std::move(weights), std::move(name));
}

MeasurePtr universal_measure(std::size_t alphabet_size, std::size_t max_order) {
    check_alphabet(alphabet_size);
    std::vector<MeasurePtr> parts;
    std::vector<double> weights;
    for (std::size_t k = 0; k <= max_order; ++k) {
        parts.push_back(kt_measure(alphabet_size, k));
        const auto kk = static_cast<double>(k);
        weights.push_back(k < max_order ? 1.0 / ((kk + 1.0) * (kk + 2.0)) : 1.0 / (kk + 1.0));
    }
    // The closed-form weights telescope to 1 up to rounding.
    const double sum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (double& w : weights) w /= sum;
    return make_mixture(std::move(parts), std::move(weights), "mixture:" + std::to_string(max_order));
}

std::size_t default_max_order(std::size_t alphabet_size) {
    check_alphabet(alphabet_size);
    if (alphabet_size == 2) return 8;
    if (alphabet_size == 256) return 3;
    std::size_t k = 0;
    while (k < 8) {
        const auto cells = checked_power(alphabet_size, k + 2);
        if (!cells || *cells > kDenseLimit) break;
        ++k;
    }
    return k;
}

MeasurePtr parse_measure(std::string_view spec, std::size_t alphabet_size, std::size_t default_mixture_order) {
    if (spec == "uniform") return uniform_measure(alphabet_size);
    if (spec == "laplace") return laplace_measure(alphabet_size);
    if (spec.starts_with("kt:")) return kt_measure(alphabet_size, parse_order(spec.substr(3), spec));
    if (spec == "mixture") return universal_measure(alphabet_size, default_mixture_order);
    if (spec.starts_with("mixture:")) return universal_measure(alphabet_size, parse_order(spec.substr(8), spec));
    throw ArgumentError("unknown measure spec '" + std::string(spec) +
                        "' (expected uniform, laplace, kt:<k> or mixture[:K])");
}

double log_measure(const SequentialMeasure& measure, std::span<const Symbol> seq) {
    if (seq.empty()) throw ArgumentError("log_measure needs a nonempty sequence");
    auto pred = measure.predictor();
    double bits = 0.0;
    for (Symbol s : seq) {
        if (s >= measure.alphabet_size()) throw ArgumentError("symbol outside measure alphabet");
        const double step = pred->consume(s);
        if (!std::isfinite(step)) throw std::logic_error(measure.name() + " assigned a nonpositive probability");
        bits += step;
    }
    return bits;
}

double log_measure(const SequentialMeasure& measure, const Sequence& seq) {
    if (seq.alphabet().size() != measure.alphabet_size())
        throw ArgumentError("measure alphabet size " + std::to_string(measure.alphabet_size()) +
                            " does not match sequence alphabet " + seq.alphabet().spec());
    return log_measure(measure, seq.symbols());
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size() || p.empty()) throw ArgumentError("distributions must have equal nonzero size");
    auto check = [](std::span<const double> d, const char* which) {
        double s = 0.0;
        for (double x : d) {
            if (!(x >= 0.0) || !std::isfinite(x))
                throw ArgumentError(std::string(which) + " has a negative or non-finite entry");
            s += x;
        }
        if (std::abs(s - 1.0) > 1e-9) throw ArgumentError(std::string(which) + " does not sum to 1");
    };
    check(p, "p");
    check(q, "q");
    double d = 0.0;
    for (std::size_t a = 0; a < p.size(); ++a) {
        if (p[a] == 0.0) continue;
        if (q[a] == 0.0) throw ArgumentError("q vanishes where p is positive");
        d += p[a] * std::log2(p[a] / q[a]);
    }
    return std::max(d, 0.0);
}

double step_error(const SourceModel& source, const SequentialMeasure& measure, std::span<const Symbol> history) {
    check_pair(source, measure);
    const auto n = measure.alphabet_size();
    auto src = source.tracker();
    auto pred = measure.predictor();
    for (Symbol s : history) {
        src->update(s);
        pred->update(s);
    }
    std::vector<double> p(n), q(n);
    src->distribution(p);
    pred->distribution(q);
    return kl_divergence(p, q);
}

double per_symbol_error(const SourceModel& source, const SequentialMeasure& measure, const Sequence& seq) {
    check_pair(source, measure);
    const double lp = log_probability(source, seq);
    if (is_impossible(lp)) throw ArgumentError("sample has zero probability under the source");
    return (lp - log_measure(measure, seq)) / static_cast<double>(seq.size());
}

std::vector<double> expected_step_errors(const SourceModel& source, const SequentialMeasure& measure,
                                         std::size_t t_max) {
    check_pair(source, measure);
    const auto n = measure.alphabet_size();
    guard(n, t_max);
    std::vector<double> acc(t_max + 1, 0.0);
    std::vector<double> ps(n), qs(n);
    auto visit = [&](std::size_t d, const SourceTracker& src, const Predictor& pred, double log_p, double) {
        src.distribution(ps);
        pred.distribution(qs);
        acc[d] += std::exp2(log_p) * kl_divergence(ps, qs);
    };
    auto src = source.tracker();
    auto pred = measure.predictor();
    walk(*src, *pred, n, t_max, 0, 0.0, 0.0, visit);
    return acc;
}

double expected_step_error(const SourceModel& source, const SequentialMeasure& measure, std::size_t t) {
    return expected_step_errors(source, measure, t).back();
}

double cumulative_error(const SourceModel& source, const SequentialMeasure& measure, std::size_t t) {
    check_pair(source, measure);
    if (t < 1) throw ArgumentError("cumulative_error needs t >= 1");
    const auto n = measure.alphabet_size();
    guard(n, t);
    double acc = 0.0;
    auto visit = [&](std::size_t d, const SourceTracker&, const Predictor&, double log_p, double log_sigma) {
        if (d == t) acc += std::exp2(log_p) * (log_p - log_sigma);
    };
    auto src = source.tracker();
    auto pred = measure.predictor();
    walk(*src, *pred, n, t, 0, 0.0, 0.0, visit);
    return acc / static_cast<double>(t);
}

PredictionError prediction_error(const SourceModel& source, const SequentialMeasure& measure, const Sequence& seq) {
    PredictionError out{step_error(source, measure, seq.symbols()), per_symbol_error(source, measure, seq),
                        std::nullopt};
    const auto words = checked_power(measure.alphabet_size(), seq.size());
    if (words && *words <= kEnumerationLimit) out.averaged = cumulative_error(source, measure, seq.size());
    return out;
}

}  // namespace entropytest
