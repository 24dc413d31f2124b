#pragma once

// Finite analogue of the transformation over Z_q. Dithers are uniform on Z_q,
// the channel is an explicit table p(y | x_1..x_K) and the receiver outputs
// (g(y) - sum u_i) mod q. The law of delta = y' - sum v_i (mod q) can be
// computed exactly by enumeration, which makes message-independence of the
// effective noise checkable to machine precision.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "modlat/random.hpp"

namespace modlat::discrete {

using Distribution = std::vector<double>;

class DiscreteSystem {
public:
    /// table[x_index * outputs + y] = p(y | x), where x_index = sum_i x_i q^i.
    DiscreteSystem(int modulus, std::size_t users, std::size_t outputs, std::vector<double> table,
                   std::vector<int> estimator)
        : q_(modulus), users_(users), outputs_(outputs), table_(std::move(table)), estimator_(std::move(estimator)) {
        if (q_ < 5 || q_ > 64) throw std::invalid_argument("discrete system: modulus must be in [5, 64]");
        if (users_ == 0) throw std::invalid_argument("discrete system: need at least one user");
        if (outputs_ == 0) throw std::invalid_argument("discrete system: empty output alphabet");
        inputs_ = 1;
        for (std::size_t i = 0; i < users_; ++i) inputs_ *= static_cast<std::size_t>(q_);
        if (table_.size() != inputs_ * outputs_) throw std::invalid_argument("discrete system: table has wrong size");
        if (estimator_.size() != outputs_) throw std::invalid_argument("discrete system: estimator has wrong size");
        for (int g : estimator_)
            if (g < 0 || g >= q_) throw std::invalid_argument("discrete system: estimator value outside Z_q");
        cumulative_.resize(table_.size());
        for (std::size_t x = 0; x < inputs_; ++x) {
            double sum = 0.0;
            for (std::size_t y = 0; y < outputs_; ++y) {
                const double p = table_[x * outputs_ + y];
                if (!(p >= 0.0)) throw std::invalid_argument("discrete system: negative probability");
                sum += p;
                cumulative_[x * outputs_ + y] = sum;
            }
            if (std::abs(sum - 1.0) > 1e-12)
                throw std::invalid_argument("discrete system: row " + std::to_string(x) + " sums to " +
                                            std::to_string(sum));
        }
    }

    int modulus() const noexcept { return q_; }
    std::size_t users() const noexcept { return users_; }
    std::size_t outputs() const noexcept { return outputs_; }
    std::size_t input_tuples() const noexcept { return inputs_; }
    double probability(std::size_t x_index, std::size_t y) const { return table_[x_index * outputs_ + y]; }
    int estimate(std::size_t y) const { return estimator_[y]; }

    int mod(long v) const noexcept {
        const long r = v % q_;
        return static_cast<int>(r < 0 ? r + q_ : r);
    }

    std::size_t encode(std::span<const int> x) const {
        std::size_t idx = 0;
        for (std::size_t i = users_; i-- > 0;) idx = idx * static_cast<std::size_t>(q_) + static_cast<std::size_t>(x[i]);
        return idx;
    }

    std::size_t sample_output(std::size_t x_index, Rng& rng) const {
        const double u = rng.uniform();
        const auto row = cumulative_.begin() + static_cast<std::ptrdiff_t>(x_index * outputs_);
        for (std::size_t y = 0; y < outputs_; ++y)
            if (u < row[static_cast<std::ptrdiff_t>(y)]) return y;
        return outputs_ - 1;
    }

private:
    int q_;
    std::size_t users_;
    std::size_t outputs_;
    std::size_t inputs_ = 1;
    std::vector<double> table_;
    std::vector<double> cumulative_;
    std::vector<int> estimator_;
};

namespace detail {

inline void check_messages(const DiscreteSystem& sys, std::span<const int> v) {
    if (v.size() != sys.users()) throw std::invalid_argument("discrete: wrong number of messages");
    for (int m : v)
        if (m < 0 || m >= sys.modulus()) throw std::invalid_argument("discrete: message outside Z_q");
}

}  // namespace detail

/// Exact law of delta over all q^K dither tuples and all channel outputs.
inline Distribution exact_noise_distribution(const DiscreteSystem& sys, std::span<const int> messages) {
    detail::check_messages(sys, messages);
    const int q = sys.modulus();
    const std::size_t k = sys.users();
    const long vsum = std::accumulate(messages.begin(), messages.end(), 0L);
    Distribution law(static_cast<std::size_t>(q), 0.0);
    std::vector<int> u(k, 0), x(k, 0);
    for (std::size_t code = 0; code < sys.input_tuples(); ++code) {
        std::size_t c = code;
        long usum = 0;
        for (std::size_t i = 0; i < k; ++i) {
            u[i] = static_cast<int>(c % static_cast<std::size_t>(q));
            c /= static_cast<std::size_t>(q);
            usum += u[i];
            x[i] = sys.mod(static_cast<long>(messages[i]) + u[i]);
        }
        const std::size_t xi = sys.encode(x);
        for (std::size_t y = 0; y < sys.outputs(); ++y) {
            const double p = sys.probability(xi, y);
            if (p == 0.0) continue;
            const int received = sys.mod(sys.estimate(y) - usum);
            law[static_cast<std::size_t>(sys.mod(received - vsum))] += p;
        }
    }
    // Normalize once so that deterministic channels give exact point masses.
    for (auto& p : law) p /= static_cast<double>(sys.input_tuples());
    return law;
}

/// Monte Carlo estimate of the same law; trial t draws from substream ("discrete", t).
inline Distribution simulate_discrete(const DiscreteSystem& sys, std::span<const int> messages, std::size_t trials,
                                      std::uint64_t seed) {
    detail::check_messages(sys, messages);
    if (trials == 0) throw std::invalid_argument("simulate_discrete: need at least one trial");
    const int q = sys.modulus();
    const std::size_t k = sys.users();
    const long vsum = std::accumulate(messages.begin(), messages.end(), 0L);
    std::vector<std::size_t> counts(static_cast<std::size_t>(q), 0);
    std::vector<int> x(k);
    for (std::size_t t = 0; t < trials; ++t) {
        Rng rng(seed, "discrete", t);
        long usum = 0;
        for (std::size_t i = 0; i < k; ++i) {
            const auto u = static_cast<int>(rng.below(static_cast<std::uint64_t>(q)));
            usum += u;
            x[i] = sys.mod(static_cast<long>(messages[i]) + u);
        }
        const std::size_t y = sys.sample_output(sys.encode(x), rng);
        const int received = sys.mod(sys.estimate(y) - usum);
        ++counts[static_cast<std::size_t>(sys.mod(received - vsum))];
    }
    Distribution law(static_cast<std::size_t>(q));
    for (std::size_t d = 0; d < law.size(); ++d) law[d] = static_cast<double>(counts[d]) / static_cast<double>(trials);
    return law;
}

inline double total_variation(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw std::invalid_argument("total_variation: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
    return 0.5 * s;
}

/// Noiseless modular adder y = (x_1 + ... + x_K) mod q, optionally with
/// symmetric +-1 noise of probability `flip` each; identity estimator.
inline DiscreteSystem modular_adder(int q, std::size_t users, double flip = 0.0) {
    std::size_t inputs = 1;
    for (std::size_t i = 0; i < users; ++i) inputs *= static_cast<std::size_t>(q);
    const auto outs = static_cast<std::size_t>(q);
    std::vector<double> table(inputs * outs, 0.0);
    for (std::size_t x = 0; x < inputs; ++x) {
        std::size_t c = x;
        long sum = 0;
        for (std::size_t i = 0; i < users; ++i) {
            sum += static_cast<long>(c % static_cast<std::size_t>(q));
            c /= static_cast<std::size_t>(q);
        }
        auto at = [&](long v) -> double& { return table[x * outs + static_cast<std::size_t>(((v % q) + q) % q)]; };
        at(sum) += 1.0 - 2.0 * flip;
        at(sum + 1) += flip;
        at(sum - 1) += flip;
    }
    std::vector<int> g(outs);
    std::iota(g.begin(), g.end(), 0);
    return DiscreteSystem(q, users, outs, std::move(table), std::move(g));
}

}  // namespace modlat::discrete
