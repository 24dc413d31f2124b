#pragma once

// End-to-end mod-lattice transformation for K users:
//   transmitter i:  x_i = (v_i + u_i) mod L
//   receiver:       y'  = (g(y) - sum_i u_i) mod L
// which yields the modulo-additive channel y' = (sum_i v_i + n) mod L with
// n = g(y) - sum_i x_i independent of the messages.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "modlat/channel.hpp"
#include "modlat/estimator.hpp"
#include "modlat/lattice.hpp"
#include "modlat/random.hpp"

namespace modlat {

struct TransformConfig {
    Lattice lattice = make_lattice(QuantizerKind::scalar, 1);
    ChannelModel channel;
    Preprocessor preprocessor;
    Estimator estimator;
    /// false disables the dither (u_i = 0); only used as a negative control.
    bool use_dither = true;

    std::size_t num_users() const noexcept { return channel.num_users; }
    std::size_t block_dimension() const noexcept { return lattice.dimension(); }
};

struct TrialRecord {
    std::uint64_t index = 0;
    std::uint64_t label = 0;  // message-tuple label for grouping
    std::vector<Vec> messages;
    std::vector<Vec> dithers;
    std::vector<Vec> transmitted;
    Vec output;    // channel output y
    Vec estimate;  // s_hat = g(y)
    Vec received;  // y'
    Vec noise;     // n_eff = s_hat - sum x_i
    Vec folded;    // n_fold = n_eff mod L
};

/// Shared pseudorandom dither sequence. Transmitter i and the receiver both
/// call draw(trial, i) and obtain the same u_i without exchanging it.
class DitherSource {
public:
    DitherSource(const Lattice& lat, std::uint64_t seed) : lattice_(&lat), seed_(seed) {}

    void draw(std::uint64_t trial, std::size_t user, std::span<double> out) const {
        Rng rng(seed_, "dither", trial * 1024 + user);
        sample_dither(*lattice_, rng, out);
    }

    Vec draw(std::uint64_t trial, std::size_t user) const {
        Vec out(lattice_->dimension());
        draw(trial, user, out);
        return out;
    }

private:
    const Lattice* lattice_;
    std::uint64_t seed_;
};

inline void require_in_voronoi(const Lattice& lat, std::span<const double> x, const char* what) {
    if (!in_voronoi(lat, x)) throw std::invalid_argument(std::string(what) + " is outside the Voronoi region");
}

/// x = (v + u) mod L.
inline Vec transmit_user(const TransformConfig& cfg, std::span<const double> v, std::span<const double> u) {
    detail::check_dim(cfg.lattice, v.size());
    detail::check_dim(cfg.lattice, u.size());
    require_in_voronoi(cfg.lattice, v, "message");
    require_in_voronoi(cfg.lattice, u, "dither");
    Vec sum(v.size());
    for (std::size_t j = 0; j < v.size(); ++j) sum[j] = v[j] + u[j];
    return mod_lattice(cfg.lattice, sum);
}

/// y' = (g(y) - sum_i u_i) mod L.
inline Vec receive(const TransformConfig& cfg, std::span<const double> y, std::span<const Vec> dithers) {
    detail::check_dim(cfg.lattice, y.size());
    Vec t(y.size());
    cfg.estimator.apply(y, t);
    for (const auto& u : dithers) {
        detail::check_dim(cfg.lattice, u.size());
        for (std::size_t j = 0; j < t.size(); ++j) t[j] -= u[j];
    }
    return mod_lattice(cfg.lattice, t);
}

/// How messages v_1..v_K are chosen for each trial.
struct MessageAssignment {
    enum class Rule { fixed, uniform, grid };
    Rule rule = Rule::uniform;
    /// fixed: trial t uses tuples[t % tuples.size()], label = t % size.
    std::vector<std::vector<Vec>> tuples;
    /// grid: points per generator axis; user messages are grid points
    /// (k + 1/2)/points in basis coordinates, folded into V.
    std::size_t grid_points = 4;

    static MessageAssignment uniform_random() { return {}; }
    static MessageAssignment fixed(std::vector<std::vector<Vec>> tuples) {
        MessageAssignment m;
        m.rule = Rule::fixed;
        m.tuples = std::move(tuples);
        return m;
    }
    static MessageAssignment grid(std::size_t points) {
        MessageAssignment m;
        m.rule = Rule::grid;
        m.grid_points = points;
        return m;
    }
};

/// Uniform random message tuple on V^K.
inline std::vector<Vec> random_message_tuple(const Lattice& lat, std::size_t users, Rng& rng) {
    std::vector<Vec> t(users, Vec(lat.dimension()));
    for (auto& v : t) sample_dither(lat, rng, v);
    return t;
}

namespace detail {

inline Vec grid_point(const Lattice& lat, std::size_t points, std::uint64_t index) {
    const std::size_t n = lat.dimension();
    Vec raw(n, 0.0);
    const auto& g = lat.generator();
    for (std::size_t c = 0; c < n; ++c) {
        const double w = (static_cast<double>(index % points) + 0.5) / static_cast<double>(points);
        index /= points;
        for (std::size_t r = 0; r < n; ++r)
            raw[r] += g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * w * lat.scale();
    }
    return mod_lattice(lat, raw);
}

inline void assign_messages(const TransformConfig& cfg, const MessageAssignment& ma, std::uint64_t trial,
                            std::uint64_t seed, TrialRecord& rec) {
    const std::size_t k = cfg.num_users();
    switch (ma.rule) {
        case MessageAssignment::Rule::fixed: {
            const auto idx = trial % ma.tuples.size();
            rec.messages = ma.tuples[idx];
            rec.label = idx;
            if (rec.messages.size() != k) throw std::invalid_argument("fixed message tuple has wrong user count");
            return;
        }
        case MessageAssignment::Rule::uniform: {
            Rng rng(seed, "message", trial);
            rec.messages = random_message_tuple(cfg.lattice, k, rng);
            rec.label = trial;
            return;
        }
        case MessageAssignment::Rule::grid: {
            std::uint64_t cells = 1;
            for (std::size_t j = 0; j < cfg.block_dimension(); ++j) cells *= ma.grid_points;
            std::uint64_t tuple_count = 1;
            for (std::size_t i = 0; i < k; ++i) tuple_count *= cells;
            std::uint64_t code = trial % tuple_count;
            rec.label = code;
            rec.messages.clear();
            for (std::size_t i = 0; i < k; ++i) {
                rec.messages.push_back(grid_point(cfg.lattice, ma.grid_points, code % cells));
                code /= cells;
            }
            return;
        }
    }
}

}  // namespace detail

/// One end-to-end pass for trial index t. Randomness: messages from
/// ("message", t), dithers from the shared DitherSource, channel noise from
/// ("channel", t).
inline TrialRecord run_trial(const TransformConfig& cfg, const MessageAssignment& ma, std::uint64_t trial,
                             std::uint64_t seed) {
    const std::size_t k = cfg.num_users();
    const std::size_t n = cfg.block_dimension();
    TrialRecord rec;
    rec.index = trial;
    detail::assign_messages(cfg, ma, trial, seed, rec);

    const DitherSource dithers(cfg.lattice, seed);
    rec.dithers.assign(k, Vec(n, 0.0));
    rec.transmitted.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
        if (cfg.use_dither) dithers.draw(trial, i, rec.dithers[i]);
        rec.transmitted[i] = transmit_user(cfg, rec.messages[i], rec.dithers[i]);
    }

    Rng channel_rng(seed, "channel", trial);
    rec.output = transmit_through(cfg.channel, cfg.preprocessor, rec.transmitted, channel_rng);

    // Receiver side regenerates the dithers from the shared seed.
    std::vector<Vec> rx_dithers(k, Vec(n, 0.0));
    if (cfg.use_dither)
        for (std::size_t i = 0; i < k; ++i) dithers.draw(trial, i, rx_dithers[i]);
    rec.received = receive(cfg, rec.output, rx_dithers);

    rec.estimate.resize(n);
    cfg.estimator.apply(rec.output, rec.estimate);
    rec.noise = rec.estimate;
    for (const auto& x : rec.transmitted)
        for (std::size_t j = 0; j < n; ++j) rec.noise[j] -= x[j];
    rec.folded = mod_lattice(cfg.lattice, rec.noise);
    return rec;
}

namespace detail {

// Runs body(t) for t in [0, count) on `workers` threads with contiguous
// chunks. body must only write state owned by index t.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
    workers = std::max<std::size_t>(1, std::min(workers, count));
    if (workers == 1) {
        for (std::size_t t = 0; t < count; ++t) body(t);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    const std::size_t chunk = (count + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                const std::size_t lo = w * chunk, hi = std::min(count, lo + chunk);
                for (std::size_t t = lo; t < hi; ++t) body(t);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline void check_config(const TransformConfig& cfg) {
    cfg.channel.validate();
    if (cfg.preprocessor.per_user.size() > cfg.num_users())
        throw std::invalid_argument("preprocessor has more entries than users");
}

}  // namespace detail

/// num_trials independent passes, merged in trial-index order regardless of
/// the worker count.
inline std::vector<TrialRecord> run_trials(const TransformConfig& cfg, const MessageAssignment& ma,
                                           std::size_t num_trials, std::uint64_t seed, std::size_t workers = 1) {
    detail::check_config(cfg);
    if (ma.rule == MessageAssignment::Rule::fixed) {
        if (ma.tuples.empty()) throw std::invalid_argument("fixed message assignment needs at least one tuple");
        for (const auto& tuple : ma.tuples) {
            if (tuple.size() != cfg.num_users()) throw std::invalid_argument("message tuple has wrong user count");
            for (const auto& v : tuple) detail::check_dim(cfg.lattice, v.size());
        }
    }
    if (ma.rule == MessageAssignment::Rule::grid && ma.grid_points == 0)
        throw std::invalid_argument("grid message assignment needs grid_points >= 1");
    std::vector<TrialRecord> records(num_trials);
    detail::parallel_for(num_trials, workers,
                         [&](std::size_t t) { records[t] = run_trial(cfg, ma, t, seed); });
    return records;
}

/// Largest coordinate of (y' - ((sum v_i + n_eff) mod L)) mod L. Zero up to
/// rounding whenever the modulo-additive identity holds.
inline double identity_deviation(const Lattice& lat, const TrialRecord& rec) {
    const std::size_t n = lat.dimension();
    Vec t = rec.noise;
    for (const auto& v : rec.messages)
        for (std::size_t j = 0; j < n; ++j) t[j] += v[j];
    const Vec expected = mod_lattice(lat, t);
    Vec diff(n);
    for (std::size_t j = 0; j < n; ++j) diff[j] = rec.received[j] - expected[j];
    const Vec folded = mod_lattice(lat, diff);
    double worst = 0.0;
    for (double d : folded) worst = std::max(worst, std::abs(d));
    return worst;
}

struct NoiseGroup {
    std::uint64_t label = 0;
    std::vector<Vec> messages;
    Vec folded;  // flattened, n values per trial
    std::size_t count = 0;
};

/// Noise samples pooled for entropy estimation and grouped by message label
/// for independence testing. Flattened arrays hold n values per trial.
struct NoiseSamples {
    std::size_t dimension = 1;
    Vec folded;
    Vec raw;
    std::vector<NoiseGroup> groups;  // ordered by first appearance

    std::size_t count() const noexcept { return folded.size() / dimension; }
};

inline NoiseSamples collect_noise(std::span<const TrialRecord> records) {
    if (records.empty()) throw std::invalid_argument("collect_noise: no records");
    NoiseSamples out;
    out.dimension = records.front().folded.size();
    out.folded.reserve(records.size() * out.dimension);
    out.raw.reserve(records.size() * out.dimension);
    std::map<std::uint64_t, std::size_t> slot;
    for (const auto& r : records) {
        out.folded.insert(out.folded.end(), r.folded.begin(), r.folded.end());
        out.raw.insert(out.raw.end(), r.noise.begin(), r.noise.end());
        auto [it, fresh] = slot.try_emplace(r.label, out.groups.size());
        if (fresh) out.groups.push_back(NoiseGroup{r.label, r.messages, {}, 0});
        auto& g = out.groups[it->second];
        g.folded.insert(g.folded.end(), r.folded.begin(), r.folded.end());
        ++g.count;
    }
    return out;
}

/// Training pairs (s, y) from dithered transmissions with uniform random
/// messages, the input law the receiver sees in deployment. Each channel use
/// contributes n pairs; `pairs` is rounded up to a whole number of uses.
inline TrainingSet generate_training_set(const TransformConfig& cfg, std::size_t pairs, std::uint64_t seed,
                                         std::size_t workers = 1) {
    detail::check_config(cfg);
    const std::size_t n = cfg.block_dimension();
    const std::size_t k = cfg.num_users();
    const std::size_t uses = (pairs + n - 1) / n;
    TrainingSet ts;
    ts.s.assign(uses * n, 0.0);
    ts.y.assign(uses * n, 0.0);
    detail::parallel_for(uses, workers, [&](std::size_t t) {
        Rng rng(seed, "training", t);
        std::vector<Vec> x(k, Vec(n));
        Vec u(n), v(n);
        for (std::size_t i = 0; i < k; ++i) {
            sample_dither(cfg.lattice, rng, v);
            sample_dither(cfg.lattice, rng, u);
            for (std::size_t j = 0; j < n; ++j) u[j] += v[j];
            mod_lattice(cfg.lattice, u, x[i]);
        }
        Vec y(n);
        transmit_through(cfg.channel, cfg.preprocessor, x, rng, y);
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t i = 0; i < k; ++i) s += x[i][j];
            ts.s[t * n + j] = s;
            ts.y[t * n + j] = y[j];
        }
    });
    return ts;
}

/// Fit an estimator of the requested kind on a fresh training run.
inline Estimator fit_estimator(const TransformConfig& cfg, EstimatorKind kind, std::size_t pairs, std::uint64_t seed,
                               std::size_t bins = 64, std::size_t min_per_bin = 100, std::size_t workers = 1) {
    if (kind == EstimatorKind::identity) return Estimator::identity();
    const TrainingSet ts = generate_training_set(cfg, pairs, seed, workers);
    if (kind == EstimatorKind::linear) return fit_linear_mmse(ts);
    return fit_binned_conditional_mean(ts, bins, min_per_bin);
}

}  // namespace modlat
