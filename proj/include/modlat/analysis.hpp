#pragma once

// Noise statistics of the induced modulo channel: plug-in histogram entropy of
// the folded and raw noise, the uniform-input rate log vol(V)/n - h(N mod L),
// message-independence tests and estimator comparisons.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "modlat/estimator.hpp"
#include "modlat/lattice.hpp"
#include "modlat/pipeline.hpp"
#include "modlat/stats.hpp"

namespace modlat {

struct EntropyEstimate {
    double nats = 0.0;           // per dimension
    double sensitivity = 0.0;    // |h(bins) - h(bins/2)|
    double standard_error = 0.0; // sampling SE of the plug-in sum
    std::size_t bins = 0;
    std::size_t samples = 0;
    bool resolution_limited = false;
    Vec probabilities;           // first (or only) coordinate histogram

    double uncertainty() const noexcept { return std::hypot(sensitivity, standard_error); }
};

namespace detail {

struct HistogramEntropy {
    double nats = 0.0;
    double standard_error = 0.0;
    double max_probability = 0.0;
    Vec probabilities;
};

// Samples are read with a stride so interleaved coordinates can be binned
// without copying. Values equal to hi fall in the last bin.
inline HistogramEntropy histogram_entropy(std::span<const double> data, std::size_t offset, std::size_t stride,
                                          double lo, double hi, std::size_t bins) {
    std::vector<std::size_t> counts(bins, 0);
    const double width = (hi - lo) / static_cast<double>(bins);
    std::size_t total = 0;
    for (std::size_t k = offset; k < data.size(); k += stride) {
        const double v = data[k];
        if (!(v >= lo && v <= hi)) throw std::invalid_argument("histogram entropy: sample outside support");
        auto b = static_cast<std::size_t>((v - lo) / width);
        if (b >= bins) b = bins - 1;
        ++counts[b];
        ++total;
    }
    if (total == 0) throw std::invalid_argument("histogram entropy: empty sample set");
    HistogramEntropy h;
    h.probabilities.resize(bins);
    double e1 = 0.0, e2 = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        const double p = static_cast<double>(counts[b]) / static_cast<double>(total);
        h.probabilities[b] = p;
        h.max_probability = std::max(h.max_probability, p);
        if (p == 0.0) continue;
        const double l = -std::log(p / width);
        e1 += p * l;
        e2 += p * l * l;
    }
    h.nats = e1;
    h.standard_error = std::sqrt(std::max(0.0, e2 - e1 * e1) / static_cast<double>(total));
    return h;
}

}  // namespace detail

/// Plug-in differential entropy of a scalar sample on [lo, hi].
inline EntropyEstimate estimate_entropy_scalar(std::span<const double> samples, double lo, double hi,
                                               std::size_t bins) {
    if (bins < 2) throw std::invalid_argument("entropy: need at least 2 bins");
    const auto full = detail::histogram_entropy(samples, 0, 1, lo, hi, bins);
    const auto half = detail::histogram_entropy(samples, 0, 1, lo, hi, bins / 2);
    EntropyEstimate e;
    e.nats = full.nats;
    e.standard_error = full.standard_error;
    e.sensitivity = std::abs(full.nats - half.nats);
    e.bins = bins;
    e.samples = samples.size();
    e.resolution_limited = full.max_probability > 0.5;
    e.probabilities = full.probabilities;
    return e;
}

/// Entropy (nats per dimension) of folded noise samples (flattened, n values
/// each). Samples are mapped to basis coordinates in [0,1)^n, which carries
/// the uniform law on V to the uniform law on the cube with Jacobian vol(V).
/// For n > 1 the joint entropy is replaced by the sum of per-coordinate
/// marginal entropies, an upper bound, so derived rates are conservative.
inline EntropyEstimate estimate_entropy_folded(const Lattice& lat, std::span<const double> samples,
                                               std::size_t bins = 256) {
    const std::size_t n = lat.dimension();
    if (samples.empty()) throw std::invalid_argument("estimate_entropy_folded: empty sample set");
    if (samples.size() % n != 0) throw std::invalid_argument("estimate_entropy_folded: sample length not a multiple of n");
    if (bins < 2) throw std::invalid_argument("estimate_entropy_folded: need at least 2 bins");
    const std::size_t count = samples.size() / n;
    Vec cube(samples.size());
    for (std::size_t k = 0; k < count; ++k) {
        const auto x = samples.subspan(k * n, n);
        if (!in_voronoi(lat, x)) throw std::invalid_argument("estimate_entropy_folded: sample outside V");
        cube_coordinates(lat, x, std::span<double>(cube).subspan(k * n, n));
    }
    EntropyEstimate e;
    e.bins = bins;
    e.samples = count;
    double se2 = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const auto full = detail::histogram_entropy(cube, j, n, 0.0, 1.0, bins);
        const auto half = detail::histogram_entropy(cube, j, n, 0.0, 1.0, bins / 2);
        e.nats += full.nats;
        e.sensitivity += std::abs(full.nats - half.nats);
        se2 += full.standard_error * full.standard_error;
        e.resolution_limited = e.resolution_limited || full.max_probability > 0.5;
        if (j == 0) e.probabilities = full.probabilities;
    }
    const double dn = static_cast<double>(n);
    e.nats = e.nats / dn + lat.log_volume_per_dim();
    e.sensitivity /= dn;
    e.standard_error = std::sqrt(se2) / dn;
    return e;
}

/// Entropy per dimension of unfolded noise, all coordinates pooled, binned
/// over the observed range.
inline EntropyEstimate estimate_entropy_raw(std::span<const double> samples, std::size_t bins = 256) {
    if (samples.empty()) throw std::invalid_argument("estimate_entropy_raw: empty sample set");
    const auto [lo, hi] = std::minmax_element(samples.begin(), samples.end());
    if (*lo == *hi) {
        EntropyEstimate e;
        e.nats = -std::numeric_limits<double>::infinity();
        e.bins = bins;
        e.samples = samples.size();
        e.resolution_limited = true;
        return e;
    }
    return estimate_entropy_scalar(samples, *lo, *hi, bins);
}

struct RateEstimate {
    double rate = 0.0;         // nats per dimension, clamped at 0
    double unclamped = 0.0;
    double uncertainty = 0.0;
    bool clamped = false;
};

struct NoiseProfile {
    EntropyEstimate folded;
    EntropyEstimate raw;
    MseEstimate mse;
    double log_volume_per_dim = 0.0;
    RateEstimate rate;
};

/// Uniform-input rate of the modulo channel: (1/n) log vol(V) - h(N mod L),
/// clamped below at zero with a flag.
inline RateEstimate achievable_rate(const NoiseProfile& profile, const Lattice& lat) {
    RateEstimate r;
    r.unclamped = lat.log_volume_per_dim() - profile.folded.nats;
    r.uncertainty = profile.folded.uncertainty();
    r.clamped = r.unclamped < 0.0;
    r.rate = std::max(0.0, r.unclamped);
    return r;
}

inline NoiseProfile make_noise_profile(const Lattice& lat, const NoiseSamples& noise, std::size_t bins = 256) {
    NoiseProfile p;
    p.log_volume_per_dim = lat.log_volume_per_dim();
    p.folded = estimate_entropy_folded(lat, noise.folded, bins);
    p.raw = estimate_entropy_raw(noise.raw, bins);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < noise.raw.size(); ++k) {
        const double sq = noise.raw[k] * noise.raw[k];
        const double d = sq - mean;
        mean += d / static_cast<double>(k + 1);
        m2 += d * (sq - mean);
    }
    const double m = static_cast<double>(noise.raw.size());
    p.mse = {mean, m > 1 ? std::sqrt(m2 / (m - 1) / m) : 0.0, noise.raw.size()};
    p.rate = achievable_rate(p, lat);
    return p;
}

/// Two-sample test between point clouds in V (flattened). Scalar lattices
/// use Kolmogorov-Smirnov; higher dimensions use chi-square homogeneity on a
/// shared 8 x 8 binning of the first two basis coordinates.
inline stats::TestResult two_sample_test(const Lattice& lat, std::span<const double> a, std::span<const double> b) {
    const std::size_t n = lat.dimension();
    if (n == 1) return stats::ks_two_sample(a, b);
    constexpr std::size_t per_axis = 8;
    const std::size_t axes = std::min<std::size_t>(n, 2);
    std::size_t cells = 1;
    for (std::size_t j = 0; j < axes; ++j) cells *= per_axis;
    auto histogram = [&](std::span<const double> data) {
        std::vector<std::size_t> counts(cells, 0);
        Vec c(n);
        for (std::size_t k = 0; k + n <= data.size(); k += n) {
            cube_coordinates(lat, data.subspan(k, n), c);
            std::size_t cell = 0;
            for (std::size_t j = 0; j < axes; ++j)
                cell = cell * per_axis + std::min(per_axis - 1, static_cast<std::size_t>(c[j] * per_axis));
            ++counts[cell];
        }
        return counts;
    };
    const auto ha = histogram(a), hb = histogram(b);
    return stats::chi_square_two_sample(ha, hb);
}

struct IndependenceReport {
    std::size_t groups = 0;
    std::size_t pairs = 0;
    std::size_t accepted = 0;
    double acceptance_fraction = 0.0;
    double worst_statistic = 0.0;
    double worst_p_value = 1.0;
    std::string test;
};

/// Pairwise two-sample tests over all group pairs at the given level.
inline IndependenceReport independence_report(const Lattice& lat, std::span<const NoiseGroup> groups,
                                              double level = 0.01, std::size_t min_samples = 1000) {
    if (groups.size() < 2) throw std::invalid_argument("independence_report: need at least 2 groups");
    for (const auto& g : groups)
        if (g.count < min_samples)
            throw std::invalid_argument("independence_report: group with " + std::to_string(g.count) +
                                        " samples, need " + std::to_string(min_samples));
    IndependenceReport r;
    r.groups = groups.size();
    r.test = lat.dimension() == 1 ? "ks" : "chi_square";
    for (std::size_t a = 0; a < groups.size(); ++a) {
        for (std::size_t b = a + 1; b < groups.size(); ++b) {
            const auto t = two_sample_test(lat, groups[a].folded, groups[b].folded);
            ++r.pairs;
            if (t.accepted(level)) ++r.accepted;
            if (t.p_value < r.worst_p_value || r.pairs == 1) {
                r.worst_p_value = t.p_value;
                r.worst_statistic = t.statistic;
            }
        }
    }
    r.acceptance_fraction = static_cast<double>(r.accepted) / static_cast<double>(r.pairs);
    return r;
}

struct ComparisonRow {
    std::string estimator;
    NoiseProfile profile;
};

/// Runs the same trials (same seed, so common random numbers) under each
/// estimator variant and profiles the resulting noise.
inline std::vector<ComparisonRow> compare_estimators(std::span<const TransformConfig> variants,
                                                     const MessageAssignment& ma, std::size_t trials,
                                                     std::uint64_t seed, std::size_t bins = 256,
                                                     std::size_t workers = 1) {
    if (variants.empty()) throw std::invalid_argument("compare_estimators: no variants");
    const auto& base = variants.front();
    std::vector<ComparisonRow> rows;
    for (const auto& v : variants) {
        if (v.lattice.kind() != base.lattice.kind() || v.lattice.dimension() != base.lattice.dimension() ||
            v.lattice.scale() != base.lattice.scale() || !(v.channel == base.channel) ||
            !(v.preprocessor == base.preprocessor) || v.use_dither != base.use_dither)
            throw std::invalid_argument("compare_estimators: mismatched configs");
        const auto records = run_trials(v, ma, trials, seed, workers);
        const auto noise = collect_noise(records);
        rows.push_back({std::string(to_string(v.estimator.kind())), make_noise_profile(v.lattice, noise, bins)});
    }
    return rows;
}

}  // namespace modlat
