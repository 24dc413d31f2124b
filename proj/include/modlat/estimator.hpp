#pragma once

// Scalar estimators s_hat = g(y) of the input sum from the channel output:
// identity, affine least squares (linear MMSE), and a quantile-binned
// conditional mean (nonlinear MMSE) with a linear fallback outside the
// training range.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iomanip>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "modlat/lattice.hpp"

namespace modlat {

/// Paired scalar samples (s_j, y_j): s is the sum of the transmitted signals
/// on one coordinate, y the channel output on that coordinate.
struct TrainingSet {
    Vec s;
    Vec y;

    std::size_t size() const noexcept { return s.size(); }
};

enum class EstimatorKind { identity, linear, binned_conditional_mean };

inline std::string_view to_string(EstimatorKind k) {
    switch (k) {
        case EstimatorKind::identity: return "identity";
        case EstimatorKind::linear: return "linear";
        case EstimatorKind::binned_conditional_mean: return "binned";
    }
    return "?";
}

inline EstimatorKind parse_estimator_kind(std::string_view s) {
    if (s == "identity") return EstimatorKind::identity;
    if (s == "linear" || s == "linear_mmse") return EstimatorKind::linear;
    if (s == "binned" || s == "binned_conditional_mean") return EstimatorKind::binned_conditional_mean;
    throw std::invalid_argument("unknown estimator kind '" + std::string(s) + "'");
}

class DegenerateOutput : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InsufficientSamples : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class Estimator {
public:
    Estimator() = default;

    static Estimator identity() { return Estimator{}; }

    static Estimator linear(double alpha, double beta) {
        Estimator e;
        e.kind_ = EstimatorKind::linear;
        e.alpha_ = alpha;
        e.beta_ = beta;
        return e;
    }

    /// edges.size() == means.size() + 1, edges strictly increasing.
    static Estimator binned(Vec edges, Vec means, std::vector<std::size_t> counts, double alpha, double beta) {
        if (edges.size() < 2 || edges.size() != means.size() + 1 || counts.size() != means.size())
            throw std::invalid_argument("binned estimator: inconsistent table sizes");
        for (std::size_t i = 1; i < edges.size(); ++i)
            if (!(edges[i] > edges[i - 1])) throw std::invalid_argument("binned estimator: edges not increasing");
        Estimator e;
        e.kind_ = EstimatorKind::binned_conditional_mean;
        e.edges_ = std::move(edges);
        e.means_ = std::move(means);
        e.counts_ = std::move(counts);
        e.alpha_ = alpha;
        e.beta_ = beta;
        return e;
    }

    EstimatorKind kind() const noexcept { return kind_; }
    double alpha() const noexcept { return alpha_; }
    double beta() const noexcept { return beta_; }
    const Vec& edges() const noexcept { return edges_; }
    const Vec& means() const noexcept { return means_; }
    const std::vector<std::size_t>& counts() const noexcept { return counts_; }
    std::size_t num_bins() const noexcept { return means_.size(); }

    double operator()(double y) const noexcept {
        switch (kind_) {
            case EstimatorKind::identity: return y;
            case EstimatorKind::linear: return alpha_ * y + beta_;
            case EstimatorKind::binned_conditional_mean: {
                if (!(y >= edges_.front() && y < edges_.back())) return alpha_ * y + beta_;
                auto it = std::upper_bound(edges_.begin(), edges_.end(), y);
                return means_[static_cast<std::size_t>(it - edges_.begin()) - 1];
            }
        }
        return y;
    }

    void apply(std::span<const double> y, std::span<double> out) const noexcept {
        for (std::size_t j = 0; j < y.size(); ++j) out[j] = (*this)(y[j]);
    }

    /// Plain-text table: a kind line, a linear line, then one line per bin.
    void write(std::ostream& os) const {
        os << std::setprecision(17);
        os << "kind," << to_string(kind_) << "\n";
        os << "linear," << alpha_ << "," << beta_ << "\n";
        for (std::size_t b = 0; b < means_.size(); ++b)
            os << "bin," << edges_[b] << "," << edges_[b + 1] << "," << means_[b] << "," << counts_[b] << "\n";
    }

    static Estimator read(std::istream& is) {
        std::string line;
        EstimatorKind kind = EstimatorKind::identity;
        double alpha = 1.0, beta = 0.0;
        Vec edges, means;
        std::vector<std::size_t> counts;
        while (std::getline(is, line)) {
            if (line.empty() || line[0] == '#') continue;
            std::stringstream ss(line);
            std::string tag, field;
            std::getline(ss, tag, ',');
            std::vector<std::string> f;
            while (std::getline(ss, field, ',')) f.push_back(field);
            if (tag == "kind" && f.size() == 1) {
                kind = parse_estimator_kind(f[0]);
            } else if (tag == "linear" && f.size() == 2) {
                alpha = std::stod(f[0]);
                beta = std::stod(f[1]);
            } else if (tag == "bin" && f.size() == 4) {
                const double lo = std::stod(f[0]);
                if (edges.empty()) edges.push_back(lo);
                else if (edges.back() != lo) throw std::invalid_argument("estimator table: bins not contiguous");
                edges.push_back(std::stod(f[1]));
                means.push_back(std::stod(f[2]));
                counts.push_back(static_cast<std::size_t>(std::stoull(f[3])));
            } else {
                throw std::invalid_argument("estimator table: malformed line '" + line + "'");
            }
        }
        switch (kind) {
            case EstimatorKind::identity: return identity();
            case EstimatorKind::linear: return linear(alpha, beta);
            case EstimatorKind::binned_conditional_mean:
                return binned(std::move(edges), std::move(means), std::move(counts), alpha, beta);
        }
        return identity();
    }

private:
    EstimatorKind kind_ = EstimatorKind::identity;
    double alpha_ = 1.0;
    double beta_ = 0.0;
    Vec edges_;
    Vec means_;
    std::vector<std::size_t> counts_;
};

inline constexpr std::size_t kMinTrainingSize = 10000;

/// alpha = Cov(S,Y)/Var(Y), beta = E[S] - alpha E[Y], empirical moments.
inline Estimator fit_linear_mmse(const TrainingSet& train) {
    const std::size_t m = train.size();
    if (train.y.size() != m) throw std::invalid_argument("training set: s and y lengths differ");
    if (m < kMinTrainingSize) throw InsufficientSamples("fit_linear_mmse: need at least 1e4 training pairs");
    const double inv = 1.0 / static_cast<double>(m);
    const double ms = std::accumulate(train.s.begin(), train.s.end(), 0.0) * inv;
    const double my = std::accumulate(train.y.begin(), train.y.end(), 0.0) * inv;
    double cov = 0.0, var = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double dy = train.y[j] - my;
        cov += (train.s[j] - ms) * dy;
        var += dy * dy;
    }
    cov *= inv;
    var *= inv;
    if (!(var > 1e-14 * (1.0 + my * my)))
        throw DegenerateOutput("fit_linear_mmse: Var(Y) is zero, channel output is constant");
    const double alpha = cov / var;
    return Estimator::linear(alpha, ms - alpha * my);
}

/// Equal-count bins over y with per-bin mean of s. Repeated y values can
/// collapse quantile edges and small bins are merged into their left
/// neighbour, so the result can have fewer bins than requested. If the
/// training set cannot supply min_per_bin points to each requested bin the
/// bin count is reduced to size / min_per_bin; below 16 bins this fails.
inline Estimator fit_binned_conditional_mean(const TrainingSet& train, std::size_t num_bins,
                                             std::size_t min_per_bin = 100) {
    constexpr std::size_t kMinBins = 16;
    const std::size_t m = train.size();
    if (num_bins < kMinBins) throw std::invalid_argument("fit_binned_conditional_mean: num_bins must be >= 16");
    if (min_per_bin == 0) throw std::invalid_argument("fit_binned_conditional_mean: min_per_bin must be >= 1");
    const Estimator fallback = fit_linear_mmse(train);
    if (m < num_bins * min_per_bin) num_bins = m / min_per_bin;
    if (num_bins < kMinBins)
        throw InsufficientSamples("fit_binned_conditional_mean: " + std::to_string(m) +
                                  " training pairs cannot fill 16 bins of " + std::to_string(min_per_bin));

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return train.y[a] < train.y[b]; });

    // Candidate edges: the quantiles plus the maximum itself, so a point mass
    // at the top of the range can form its own bin. The final edge is a
    // sentinel just above the maximum; every bin is [lo, hi).
    Vec cand;
    cand.reserve(num_bins + 2);
    for (std::size_t b = 0; b < num_bins; ++b) cand.push_back(train.y[order[b * m / num_bins]]);
    const double y_max = train.y[order[m - 1]];
    cand.push_back(y_max);
    cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
    const double sentinel = std::nextafter(y_max, std::numeric_limits<double>::infinity());

    // Walk the sorted samples, closing a bin once it has min_per_bin points and
    // the next sample crosses a candidate edge.
    Vec edges{cand.front()}, means;
    std::vector<std::size_t> counts;
    std::size_t next_edge = 1;
    double sum = 0.0;
    std::size_t count = 0;
    for (std::size_t k = 0; k < m; ++k) {
        const double yv = train.y[order[k]];
        while (next_edge < cand.size() && yv >= cand[next_edge]) {
            if (count >= min_per_bin) {
                edges.push_back(cand[next_edge]);
                means.push_back(sum / static_cast<double>(count));
                counts.push_back(count);
                sum = 0.0;
                count = 0;
            }
            ++next_edge;
        }
        sum += train.s[order[k]];
        ++count;
    }
    if (count >= min_per_bin || means.empty()) {
        edges.push_back(sentinel);
        means.push_back(sum / static_cast<double>(count));
        counts.push_back(count);
    } else {
        // Fold the short tail into the previous bin.
        const double prev_sum = means.back() * static_cast<double>(counts.back());
        counts.back() += count;
        means.back() = (prev_sum + sum) / static_cast<double>(counts.back());
        edges.back() = sentinel;
    }
    return Estimator::binned(std::move(edges), std::move(means), std::move(counts), fallback.alpha(), fallback.beta());
}

struct MseEstimate {
    double mse = 0.0;
    double standard_error = 0.0;
    std::size_t samples = 0;
};

/// Empirical E[(g(y) - s)^2] with its standard error.
inline MseEstimate evaluate_mse(const Estimator& est, const TrainingSet& test) {
    const std::size_t m = test.size();
    if (m == 0) return {};
    double mean = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < m; ++j) {
        const double e = est(test.y[j]) - test.s[j];
        const double sq = e * e;
        const double delta = sq - mean;
        mean += delta / static_cast<double>(j + 1);
        m2 += delta * (sq - mean);
    }
    MseEstimate out;
    out.mse = mean;
    out.samples = m;
    out.standard_error = m > 1 ? std::sqrt(m2 / static_cast<double>(m - 1) / static_cast<double>(m)) : 0.0;
    return out;
}

}  // namespace modlat
