#pragma once

// Lattices with Voronoi fundamental regions: nearest-point quantizers for
// Z, Z^n, A2, D4 and E8, the mod-lattice fold, dither sampling and second
// moment bookkeeping. A lattice is `scale * generator * Z^n`; quantizers work
// in base (scale 1) coordinates.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "modlat/random.hpp"

namespace modlat {

using Vec = std::vector<double>;

enum class QuantizerKind { scalar, cubic, hexagonal_A2, D4, E8 };

inline std::string_view to_string(QuantizerKind k) {
    switch (k) {
        case QuantizerKind::scalar: return "scalar";
        case QuantizerKind::cubic: return "cubic";
        case QuantizerKind::hexagonal_A2: return "A2";
        case QuantizerKind::D4: return "D4";
        case QuantizerKind::E8: return "E8";
    }
    return "?";
}

inline QuantizerKind parse_quantizer_kind(std::string_view s) {
    if (s == "scalar") return QuantizerKind::scalar;
    if (s == "cubic") return QuantizerKind::cubic;
    if (s == "A2" || s == "hexagonal_A2" || s == "hexagonal") return QuantizerKind::hexagonal_A2;
    if (s == "D4") return QuantizerKind::D4;
    if (s == "E8") return QuantizerKind::E8;
    throw std::invalid_argument("unknown lattice kind '" + std::string(s) + "'");
}

class Lattice {
public:
    Lattice(std::string name, QuantizerKind kind, Eigen::MatrixXd generator, double scale)
        : name_(std::move(name)), kind_(kind), generator_(std::move(generator)), scale_(scale) {
        if (generator_.rows() != generator_.cols() || generator_.rows() == 0)
            throw std::invalid_argument("lattice generator must be square and non-empty");
        if (!(scale_ > 0.0) || !std::isfinite(scale_))
            throw std::invalid_argument("lattice scale must be positive and finite");
        const double det = generator_.determinant();
        if (!(std::abs(det) > 1e-12)) throw std::invalid_argument("lattice generator is singular");
        base_volume_ = std::abs(det);
        inverse_ = generator_.inverse();
    }

    const std::string& name() const noexcept { return name_; }
    QuantizerKind kind() const noexcept { return kind_; }
    std::size_t dimension() const noexcept { return static_cast<std::size_t>(generator_.rows()); }
    /// Base generator; basis vectors are the columns.
    const Eigen::MatrixXd& generator() const noexcept { return generator_; }
    const Eigen::MatrixXd& generator_inverse() const noexcept { return inverse_; }
    double scale() const noexcept { return scale_; }

    double volume() const noexcept {
        return base_volume_ * std::pow(scale_, static_cast<double>(dimension()));
    }
    /// (1/n) log vol(V), the entropy of a uniform variable on V in nats per dimension.
    double log_volume_per_dim() const noexcept {
        return std::log(base_volume_) / static_cast<double>(dimension()) + std::log(scale_);
    }

    Lattice rescaled(double new_scale) const { return Lattice(name_, kind_, generator_, new_scale); }

private:
    std::string name_;
    QuantizerKind kind_;
    Eigen::MatrixXd generator_;
    Eigen::MatrixXd inverse_;
    double scale_;
    double base_volume_ = 1.0;
};

struct LatticeStats {
    double second_moment = 0.0;             // per-dimension E||U||^2 / n
    double standard_error = 0.0;
    double normalized_second_moment = 0.0;  // G = second_moment / volume^(2/n)
    double volume = 0.0;
};

namespace detail {

// Round to nearest integer; halves go up so residuals land in [-1/2, 1/2).
inline double round_half_up(double v) noexcept { return std::floor(v + 0.5); }

inline double sq_dist(std::span<const double> x, std::span<const double> p) noexcept {
    double d = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) d += (x[i] - p[i]) * (x[i] - p[i]);
    return d;
}

// True if candidate a is preferred over b as the nearest point to x. Equal
// distances go to the point leaving the lexicographically smaller residual.
inline bool prefer(std::span<const double> x, std::span<const double> a, std::span<const double> b) {
    const double da = sq_dist(x, a);
    const double db = sq_dist(x, b);
    if (da != db) return da < db;
    return std::lexicographical_compare(b.begin(), b.end(), a.begin(), a.end());
}

inline void nearest_cubic(std::span<const double> x, std::span<double> out) noexcept {
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = round_half_up(x[i]);
}

// Conway & Sloane D_n decoder: round every coordinate; if the coordinate sum
// is odd, re-round the coordinate with the largest rounding error the other way.
inline void nearest_Dn(std::span<const double> x, std::span<double> out) noexcept {
    double sum = 0.0;
    std::size_t worst = 0;
    double worst_err = -1.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        out[i] = round_half_up(x[i]);
        sum += out[i];
        const double err = std::abs(x[i] - out[i]);
        if (err > worst_err) {
            worst_err = err;
            worst = i;
        }
    }
    if (std::fmod(std::abs(sum), 2.0) != 0.0) {
        out[worst] += (x[worst] - out[worst] >= 0.0) ? 1.0 : -1.0;
    }
}

// E8 = D8 u (D8 + 1/2).
inline void nearest_E8(std::span<const double> x, std::span<double> out) {
    std::array<double, 8> shifted{}, a{}, b{};
    nearest_Dn(x, a);
    for (std::size_t i = 0; i < 8; ++i) shifted[i] = x[i] - 0.5;
    nearest_Dn(shifted, b);
    for (auto& v : b) v += 0.5;
    const auto& best = prefer(x, a, b) ? a : b;
    std::copy(best.begin(), best.end(), out.begin());
}

// A2 with basis (1,0), (1/2, sqrt3/2) is the union of the rectangular lattice
// Z x sqrt3 Z and its translate by (1/2, sqrt3/2).
inline void nearest_A2(std::span<const double> x, std::span<double> out) {
    constexpr double h = std::numbers::sqrt3;
    std::array<double, 2> a{round_half_up(x[0]), h * round_half_up(x[1] / h)};
    std::array<double, 2> b{0.5 + round_half_up(x[0] - 0.5), h * (0.5 + round_half_up(x[1] / h - 0.5))};
    const auto& best = prefer(x, a, b) ? a : b;
    out[0] = best[0];
    out[1] = best[1];
}

inline void nearest_base(QuantizerKind kind, std::span<const double> x, std::span<double> out) {
    switch (kind) {
        case QuantizerKind::scalar:
        case QuantizerKind::cubic: nearest_cubic(x, out); return;
        case QuantizerKind::hexagonal_A2: nearest_A2(x, out); return;
        case QuantizerKind::D4: nearest_Dn(x, out); return;
        case QuantizerKind::E8: nearest_E8(x, out); return;
    }
}

inline void check_dim(const Lattice& lat, std::size_t n) {
    if (n != lat.dimension())
        throw std::invalid_argument("dimension mismatch: lattice " + lat.name() + " has dimension " +
                                    std::to_string(lat.dimension()) + ", got " + std::to_string(n));
}

}  // namespace detail

/// Closest lattice point to x (Euclidean); ties leave the lexicographically
/// smallest residual x - p.
inline void nearest_point(const Lattice& lat, std::span<const double> x, std::span<double> out) {
    detail::check_dim(lat, x.size());
    detail::check_dim(lat, out.size());
    const double s = lat.scale();
    thread_local Vec scaled;
    scaled.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) scaled[i] = x[i] / s;
    detail::nearest_base(lat.kind(), scaled, out);
    for (auto& v : out) v *= s;
}

inline Vec nearest_point(const Lattice& lat, std::span<const double> x) {
    Vec out(x.size());
    nearest_point(lat, x, out);
    return out;
}

/// x mod Lambda, folded into the Voronoi region: x - nearest_point(x).
/// The result r always satisfies nearest_point(r) == 0 exactly, so the fold is
/// idempotent bit-for-bit.
inline void mod_lattice(const Lattice& lat, std::span<const double> x, std::span<double> out) {
    detail::check_dim(lat, x.size());
    detail::check_dim(lat, out.size());
    thread_local Vec p;
    p.resize(x.size());
    nearest_point(lat, x, p);
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] - p[i];
    // Rounding in x/scale can push a residual onto the far side of a Voronoi
    // facet; refold until it is a fixed point.
    for (int iter = 0; iter < 4; ++iter) {
        nearest_point(lat, out, p);
        if (std::all_of(p.begin(), p.end(), [](double v) { return v == 0.0; })) return;
        for (std::size_t i = 0; i < x.size(); ++i) out[i] -= p[i];
    }
}

inline Vec mod_lattice(const Lattice& lat, std::span<const double> x) {
    Vec out(x.size());
    mod_lattice(lat, x, out);
    return out;
}

/// Membership in V up to a boundary tolerance: ||x|| is within tol of ||x - p||.
inline bool in_voronoi(const Lattice& lat, std::span<const double> x, double tol = 1e-9) {
    const Vec p = nearest_point(lat, x);
    double nx = 0.0;
    for (double v : x) nx += v * v;
    return std::sqrt(nx) - std::sqrt(detail::sq_dist(x, p)) <= tol;
}

/// Uniform sample on V: a uniform point of the fundamental parallelepiped,
/// folded into V.
inline void sample_dither(const Lattice& lat, Rng& rng, std::span<double> out) {
    detail::check_dim(lat, out.size());
    const std::size_t n = lat.dimension();
    const auto& g = lat.generator();
    thread_local Vec w, raw;
    w.resize(n);
    raw.assign(n, 0.0);
    for (auto& c : w) c = rng.uniform();
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) acc += g(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * w[c];
        raw[r] = acc * lat.scale();
    }
    mod_lattice(lat, raw, out);
}

inline Vec sample_dither(const Lattice& lat, Rng& rng) {
    Vec out(lat.dimension());
    sample_dither(lat, rng, out);
    return out;
}

/// Coordinates of x in the (scaled) generator basis, reduced mod 1 into
/// [0,1)^n. This is a measure-preserving (up to the constant Jacobian
/// vol(V)) bijection from V onto the unit cube.
inline void cube_coordinates(const Lattice& lat, std::span<const double> x, std::span<double> out) {
    detail::check_dim(lat, x.size());
    const std::size_t n = lat.dimension();
    const auto& inv = lat.generator_inverse();
    for (std::size_t r = 0; r < n; ++r) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c)
            acc += inv(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) * x[c];
        acc /= lat.scale();
        double f = acc - std::floor(acc);
        if (f >= 1.0) f = 0.0;
        out[r] = f;
    }
}

/// Closed-form normalized second moment G of the base lattice.
inline double normalized_second_moment(QuantizerKind kind) {
    switch (kind) {
        case QuantizerKind::scalar:
        case QuantizerKind::cubic: return 1.0 / 12.0;
        case QuantizerKind::hexagonal_A2: return 5.0 / (36.0 * std::numbers::sqrt3);
        case QuantizerKind::D4: return 13.0 / (120.0 * std::numbers::sqrt2);
        case QuantizerKind::E8: return 929.0 / 12960.0;
    }
    return 0.0;
}

/// sigma^2(Lambda) from the closed-form G: G * vol^(2/n).
inline double closed_form_second_moment(const Lattice& lat) {
    return normalized_second_moment(lat.kind()) *
           std::exp(2.0 * lat.log_volume_per_dim());
}

inline LatticeStats estimate_second_moment(const Lattice& lat, std::size_t num_samples, Rng& rng) {
    if (num_samples < 10000) throw std::invalid_argument("estimate_second_moment needs at least 1e4 samples");
    const std::size_t n = lat.dimension();
    Vec u(n);
    double mean = 0.0, m2 = 0.0;
    for (std::size_t k = 0; k < num_samples; ++k) {
        sample_dither(lat, rng, u);
        double e = 0.0;
        for (double v : u) e += v * v;
        e /= static_cast<double>(n);
        const double delta = e - mean;
        mean += delta / static_cast<double>(k + 1);
        m2 += delta * (e - mean);
    }
    LatticeStats st;
    st.second_moment = mean;
    st.standard_error = std::sqrt(m2 / static_cast<double>(num_samples - 1) / static_cast<double>(num_samples));
    st.volume = lat.volume();
    st.normalized_second_moment = mean / std::exp(2.0 * lat.log_volume_per_dim());
    return st;
}

/// Rescale so that sigma^2(Lambda) = power (closed-form second moment).
inline Lattice scale_to_power(const Lattice& lat, double power) {
    if (!(power > 0.0) || !std::isfinite(power)) throw std::invalid_argument("target power must be positive");
    const double current = closed_form_second_moment(lat);
    return lat.rescaled(lat.scale() * std::sqrt(power / current));
}

/// Base generator for a lattice kind. Scalar and cubic accept any dimension
/// (scalar requires 1); A2, D4 and E8 have fixed dimension.
inline Eigen::MatrixXd base_generator(QuantizerKind kind, std::size_t dimension) {
    using M = Eigen::MatrixXd;
    switch (kind) {
        case QuantizerKind::scalar:
            if (dimension != 1) throw std::invalid_argument("scalar lattice has dimension 1");
            return M::Identity(1, 1);
        case QuantizerKind::cubic:
            if (dimension == 0) throw std::invalid_argument("cubic lattice needs dimension >= 1");
            return M::Identity(static_cast<Eigen::Index>(dimension), static_cast<Eigen::Index>(dimension));
        case QuantizerKind::hexagonal_A2: {
            if (dimension != 2) throw std::invalid_argument("A2 lattice has dimension 2");
            M g(2, 2);
            g << 1.0, 0.5,
                 0.0, std::numbers::sqrt3 / 2.0;
            return g;
        }
        case QuantizerKind::D4: {
            if (dimension != 4) throw std::invalid_argument("D4 lattice has dimension 4");
            M g(4, 4);
            g << 1,  1,  0,  0,
                 1, -1,  1,  0,
                 0,  0, -1,  1,
                 0,  0,  0, -1;
            return g;
        }
        case QuantizerKind::E8: {
            if (dimension != 8) throw std::invalid_argument("E8 lattice has dimension 8");
            // Columns: 2e0, e_c - e_{c-1} for c = 1..6, and (1/2, ..., 1/2).
            M g = M::Zero(8, 8);
            g(0, 0) = 2.0;
            for (Eigen::Index c = 1; c < 7; ++c) {
                g(c - 1, c) = -1.0;
                g(c, c) = 1.0;
            }
            for (Eigen::Index r = 0; r < 8; ++r) g(r, 7) = 0.5;
            return g;
        }
    }
    throw std::invalid_argument("unknown lattice kind");
}

inline Lattice make_lattice(QuantizerKind kind, std::size_t dimension, double scale = 1.0) {
    std::string name(to_string(kind));
    if (kind == QuantizerKind::cubic) name = "Z" + std::to_string(dimension);
    return Lattice(std::move(name), kind, base_generator(kind, dimension), scale);
}

/// q * Z.
inline Lattice make_scalar(double q) { return make_lattice(QuantizerKind::scalar, 1, q); }

}  // namespace modlat
