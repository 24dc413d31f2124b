#pragma once

// Two-sample distribution tests used to check input-independence of the
// effective noise and uniformity of dithered signals.

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace modlat::stats {

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;
    bool accepted(double level = 0.01) const noexcept { return p_value >= level; }
};

/// Asymptotic Kolmogorov survival function Q(lambda) = 2 sum (-1)^{k-1} exp(-2 k^2 lambda^2).
inline double kolmogorov_q(double lambda) {
    if (lambda < 0.2) return 1.0;
    double sum = 0.0, sign = 1.0;
    for (int k = 1; k <= 200; ++k) {
        const double term = std::exp(-2.0 * k * k * lambda * lambda);
        sum += sign * term;
        if (term < 1e-16 * std::abs(sum)) break;
        sign = -sign;
    }
    return std::clamp(2.0 * sum, 0.0, 1.0);
}

/// Two-sample Kolmogorov-Smirnov test with the Stephens small-sample correction.
inline TestResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < x.size() && j < y.size()) {
        const double v = std::min(x[i], y[j]);
        while (i < x.size() && x[i] == v) ++i;
        while (j < y.size() && y[j] == v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    const double ne = std::sqrt(na * nb / (na + nb));
    return {d, kolmogorov_q((ne + 0.12 + 0.11 / ne) * d)};
}

/// Chi-square test of homogeneity for two histograms on the same cells.
/// Cells empty in both samples are dropped from the degrees of freedom.
inline TestResult chi_square_two_sample(std::span<const std::size_t> a, std::span<const std::size_t> b) {
    if (a.size() != b.size()) throw std::invalid_argument("chi_square_two_sample: cell count mismatch");
    double ra = 0.0, rb = 0.0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        ra += static_cast<double>(a[c]);
        rb += static_cast<double>(b[c]);
    }
    if (ra == 0.0 || rb == 0.0) throw std::invalid_argument("chi_square_two_sample: empty sample");
    const double k1 = std::sqrt(rb / ra), k2 = std::sqrt(ra / rb);
    double chi2 = 0.0;
    std::size_t cells = 0;
    for (std::size_t c = 0; c < a.size(); ++c) {
        const double ca = static_cast<double>(a[c]), cb = static_cast<double>(b[c]);
        if (ca + cb == 0.0) continue;
        ++cells;
        const double t = k1 * ca - k2 * cb;
        chi2 += t * t / (ca + cb);
    }
    if (cells < 2) return {0.0, 1.0};
    const boost::math::chi_squared dist(static_cast<double>(cells - 1));
    return {chi2, boost::math::cdf(boost::math::complement(dist, chi2))};
}

struct MeanEstimate {
    double mean = 0.0;
    double standard_error = 0.0;
};

inline MeanEstimate mean_with_se(std::span<const double> x) {
    if (x.empty()) return {};
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double d = x[k] - mean;
        mean += d / static_cast<double>(k + 1);
        m2 += d * (x[k] - mean);
    }
    const double n = static_cast<double>(x.size());
    return {mean, x.size() > 1 ? std::sqrt(m2 / (n - 1) / n) : 0.0};
}

}  // namespace modlat::stats
