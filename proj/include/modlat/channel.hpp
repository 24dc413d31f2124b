#pragma once

// Memoryless K-user MAC channel models. Each coordinate of an n-dimensional
// channel use is passed through the scalar channel law with its own noise draw.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "modlat/lattice.hpp"
#include "modlat/random.hpp"

namespace modlat {

enum class NoiseLaw { gaussian, laplace, uniform, gaussian_mixture };
enum class Structure { additive_sum, clipped_sum, cubic_sum, weighted_sum, multiplicative };

inline std::string_view to_string(NoiseLaw n) {
    switch (n) {
        case NoiseLaw::gaussian: return "gaussian";
        case NoiseLaw::laplace: return "laplace";
        case NoiseLaw::uniform: return "uniform";
        case NoiseLaw::gaussian_mixture: return "gaussian_mixture";
    }
    return "?";
}

inline std::string_view to_string(Structure s) {
    switch (s) {
        case Structure::additive_sum: return "additive_sum";
        case Structure::clipped_sum: return "clipped_sum";
        case Structure::cubic_sum: return "cubic_sum";
        case Structure::weighted_sum: return "weighted_sum";
        case Structure::multiplicative: return "multiplicative";
    }
    return "?";
}

inline NoiseLaw parse_noise_law(std::string_view s) {
    if (s == "gaussian") return NoiseLaw::gaussian;
    if (s == "laplace") return NoiseLaw::laplace;
    if (s == "uniform") return NoiseLaw::uniform;
    if (s == "gaussian_mixture") return NoiseLaw::gaussian_mixture;
    throw std::invalid_argument("unknown noise law '" + std::string(s) + "'");
}

inline Structure parse_structure(std::string_view s) {
    if (s == "additive_sum") return Structure::additive_sum;
    if (s == "clipped_sum") return Structure::clipped_sum;
    if (s == "cubic_sum") return Structure::cubic_sum;
    if (s == "weighted_sum") return Structure::weighted_sum;
    if (s == "multiplicative") return Structure::multiplicative;
    throw std::invalid_argument("unknown channel structure '" + std::string(s) + "'");
}

/// Scalar channel law p(y | x_1..x_K). All noise laws are zero mean and
/// parametrized by their variance.
struct ChannelModel {
    std::string name = "awgn";
    std::size_t num_users = 2;
    Structure structure = Structure::additive_sum;
    NoiseLaw noise_law = NoiseLaw::gaussian;
    double noise_variance = 1.0;
    double clip_level = 1.0;   // clipped_sum
    double cubic_coeff = 0.0;  // cubic_sum: s + k s^3
    std::vector<double> gains; // weighted_sum, one per user
    // Two-component mixture: weights and variance multipliers, renormalized
    // so the mixture variance equals noise_variance.
    double mixture_weight = 0.9;
    double mixture_low = 0.5;
    double mixture_high = 5.5;

    bool operator==(const ChannelModel&) const = default;

    void validate() const {
        if (num_users == 0) throw std::invalid_argument("channel: num_users must be >= 1");
        if (!(noise_variance >= 0.0) || !std::isfinite(noise_variance))
            throw std::invalid_argument("channel: noise_variance must be >= 0");
        if (structure == Structure::clipped_sum && !(clip_level > 0.0))
            throw std::invalid_argument("channel: clip level must be > 0");
        if (structure == Structure::weighted_sum && gains.size() != num_users)
            throw std::invalid_argument("channel: weighted_sum needs one gain per user");
        if (noise_law == NoiseLaw::gaussian_mixture &&
            (!(mixture_weight > 0.0 && mixture_weight < 1.0) || !(mixture_low > 0.0) || !(mixture_high > 0.0)))
            throw std::invalid_argument("channel: invalid mixture parameters");
    }

    double sample_noise(Rng& rng) const {
        switch (noise_law) {
            case NoiseLaw::gaussian: return std::sqrt(noise_variance) * rng.normal();
            case NoiseLaw::laplace: return rng.laplace(std::sqrt(noise_variance / 2.0));
            case NoiseLaw::uniform: {
                const double a = std::sqrt(3.0 * noise_variance);
                return rng.uniform(-a, a);
            }
            case NoiseLaw::gaussian_mixture: {
                const double norm = mixture_weight * mixture_low + (1.0 - mixture_weight) * mixture_high;
                const double mult = rng.uniform() < mixture_weight ? mixture_low : mixture_high;
                return std::sqrt(noise_variance * mult / norm) * rng.normal();
            }
        }
        return 0.0;
    }

    /// One scalar channel use on already-preprocessed inputs.
    double apply(std::span<const double> inputs, Rng& rng) const {
        double sum = 0.0;
        if (structure == Structure::weighted_sum) {
            for (std::size_t i = 0; i < inputs.size(); ++i) sum += gains[i] * inputs[i];
        } else {
            for (double v : inputs) sum += v;
        }
        const double z = sample_noise(rng);
        switch (structure) {
            case Structure::additive_sum:
            case Structure::weighted_sum: return sum + z;
            case Structure::clipped_sum: return std::clamp(sum, -clip_level, clip_level) + z;
            case Structure::cubic_sum: return sum + cubic_coeff * sum * sum * sum + z;
            case Structure::multiplicative: return sum * (1.0 + z);
        }
        throw std::invalid_argument("channel: unknown structure");
    }
};

enum class PreprocessKind { identity, affine, tanh_companding, cubic_predistortion };

inline PreprocessKind parse_preprocess_kind(std::string_view s) {
    if (s == "identity") return PreprocessKind::identity;
    if (s == "affine") return PreprocessKind::affine;
    if (s == "tanh" || s == "tanh_companding") return PreprocessKind::tanh_companding;
    if (s == "cubic" || s == "cubic_predistortion") return PreprocessKind::cubic_predistortion;
    throw std::invalid_argument("unknown preprocessor '" + std::string(s) + "'");
}

inline std::string_view to_string(PreprocessKind k) {
    switch (k) {
        case PreprocessKind::identity: return "identity";
        case PreprocessKind::affine: return "affine";
        case PreprocessKind::tanh_companding: return "tanh_companding";
        case PreprocessKind::cubic_predistortion: return "cubic_predistortion";
    }
    return "?";
}

/// Deterministic scalar map applied by one transmitter before the channel.
///   affine: a x + b;  tanh_companding: tanh(a x) / a;  cubic_predistortion: x - a x^3.
struct PreprocessMap {
    PreprocessKind kind = PreprocessKind::identity;
    double a = 1.0;
    double b = 0.0;

    bool operator==(const PreprocessMap&) const = default;

    double operator()(double x) const noexcept {
        switch (kind) {
            case PreprocessKind::identity: return x;
            case PreprocessKind::affine: return a * x + b;
            case PreprocessKind::tanh_companding: return std::tanh(a * x) / a;
            case PreprocessKind::cubic_predistortion: return x - a * x * x * x;
        }
        return x;
    }
};

/// Per-user preprocessing; users without an entry use the identity.
struct Preprocessor {
    std::vector<PreprocessMap> per_user;

    bool operator==(const Preprocessor&) const = default;

    static Preprocessor uniform(PreprocessMap m, std::size_t users) {
        return Preprocessor{std::vector<PreprocessMap>(users, m)};
    }

    double apply(std::size_t user, double x) const noexcept {
        return user < per_user.size() ? per_user[user](x) : x;
    }
};

/// y[j] ~ channel(f_1(x_1[j]), ..., f_K(x_K[j])), coordinate-wise.
inline void transmit_through(const ChannelModel& ch, const Preprocessor& pre, std::span<const Vec> x, Rng& rng,
                             std::span<double> y) {
    if (x.size() != ch.num_users)
        throw std::invalid_argument("transmit_through: expected " + std::to_string(ch.num_users) + " user inputs, got " +
                                    std::to_string(x.size()));
    const std::size_t n = y.size();
    for (const auto& xi : x)
        if (xi.size() != n) throw std::invalid_argument("transmit_through: input length mismatch");
    thread_local Vec inputs;
    inputs.resize(x.size());
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < x.size(); ++i) inputs[i] = pre.apply(i, x[i][j]);
        y[j] = ch.apply(inputs, rng);
    }
}

inline Vec transmit_through(const ChannelModel& ch, const Preprocessor& pre, std::span<const Vec> x, Rng& rng) {
    if (x.empty()) throw std::invalid_argument("transmit_through: no inputs");
    Vec y(x.front().size());
    transmit_through(ch, pre, x, rng, y);
    return y;
}

/// E[S^2] = K P for independent zero-mean users at power P.
inline double sum_power(const ChannelModel& ch, double power) {
    if (!(power > 0.0)) throw std::invalid_argument("sum_power: power must be > 0");
    return static_cast<double>(ch.num_users) * power;
}

/// Reference channel family at per-user power P, noise levels relative to the
/// sum power K P. Covers additive, clipped, cubic, weighted and multiplicative
/// structures and all four noise laws.
inline std::vector<ChannelModel> channel_zoo(std::size_t users, double power) {
    const double kp = static_cast<double>(users) * power;
    std::vector<ChannelModel> zoo;
    auto add = [&](std::string name, Structure s, NoiseLaw law, double var) -> ChannelModel& {
        ChannelModel ch;
        ch.name = std::move(name);
        ch.num_users = users;
        ch.structure = s;
        ch.noise_law = law;
        ch.noise_variance = var;
        return zoo.emplace_back(std::move(ch));
    };
    add("awgn", Structure::additive_sum, NoiseLaw::gaussian, 0.5 * kp);
    add("clipped", Structure::clipped_sum, NoiseLaw::gaussian, 0.1 * kp).clip_level = 0.8 * std::sqrt(kp);
    add("cubic", Structure::cubic_sum, NoiseLaw::laplace, 0.2 * kp).cubic_coeff = 0.1 / kp;
    auto& weighted = add("weighted", Structure::weighted_sum, NoiseLaw::uniform, 0.2 * kp);
    for (std::size_t i = 0; i < users; ++i) weighted.gains.push_back(i % 2 == 0 ? 1.0 : 0.5);
    add("multiplicative", Structure::multiplicative, NoiseLaw::gaussian, 0.1);
    add("impulsive", Structure::additive_sum, NoiseLaw::gaussian_mixture, 0.2 * kp);
    return zoo;
}

}  // namespace modlat
