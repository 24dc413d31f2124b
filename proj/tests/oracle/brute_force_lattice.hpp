#pragma once

// Test-only nearest-point oracle: exhaustive enumeration of every lattice
// point inside a ball around x, using only the generator matrix (Fincke-Pohst
// style depth-first search over integer coefficients). Independent of the
// closed-form coset decoders in lattice.hpp.

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "modlat/lattice.hpp"

namespace modlat::oracle {

struct Enumeration {
    Eigen::VectorXd best;
    double best_dist2 = std::numeric_limits<double>::infinity();
    std::size_t points_visited = 0;
};

namespace detail {

inline void search(const Eigen::MatrixXd& r, const Eigen::VectorXd& target, double radius2,
                   Eigen::Index level, Eigen::VectorXd& z, double partial, const Eigen::MatrixXd& basis,
                   const Eigen::VectorXd& x, Enumeration& e) {
    if (level < 0) {
        ++e.points_visited;
        const Eigen::VectorXd p = basis * z;
        const double d = (x - p).squaredNorm();
        bool take = d < e.best_dist2;
        if (!take && d == e.best_dist2) {
            // Same rule as production: lexicographically smaller residual wins.
            for (Eigen::Index i = 0; i < x.size(); ++i) {
                const double a = x(i) - p(i), b = x(i) - e.best(i);
                if (a != b) {
                    take = a < b;
                    break;
                }
            }
        }
        if (take) {
            e.best = p;
            e.best_dist2 = d;
        }
        return;
    }
    const Eigen::Index n = r.rows();
    double rhs = target(level);
    for (Eigen::Index j = level + 1; j < n; ++j) rhs -= r(level, j) * z(j);
    const double diag = r(level, level);
    const double centre = rhs / diag;
    const double slack = radius2 - partial;
    if (slack < 0) return;
    const double half_width = std::sqrt(slack) / std::abs(diag);
    const auto lo = static_cast<long>(std::ceil(centre - half_width));
    const auto hi = static_cast<long>(std::floor(centre + half_width));
    for (long k = lo; k <= hi; ++k) {
        z(level) = static_cast<double>(k);
        const double t = diag * static_cast<double>(k) - rhs;
        search(r, target, radius2, level - 1, z, partial + t * t, basis, x, e);
    }
}

}  // namespace detail

/// All lattice points within `radius` of x are visited; returns the closest.
inline Enumeration enumerate_ball(const Lattice& lat, const std::vector<double>& xv, double radius) {
    const Eigen::Index n = static_cast<Eigen::Index>(lat.dimension());
    const Eigen::MatrixXd basis = lat.generator() * lat.scale();
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    const Eigen::MatrixXd q = qr.householderQ();
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xv.data(), n);
    const Eigen::VectorXd target = q.transpose() * x;
    Enumeration e;
    Eigen::VectorXd z(n);
    detail::search(r, target, radius * radius * (1.0 + 1e-12) + 1e-15, n - 1, z, 0.0, basis, x, e);
    return e;
}

/// Nearest point by enumeration. The ball radius is the distance to the
/// Babai rounding point, which guarantees at least one candidate.
inline std::vector<double> brute_force_nearest(const Lattice& lat, const std::vector<double>& xv) {
    const Eigen::Index n = static_cast<Eigen::Index>(lat.dimension());
    const Eigen::MatrixXd basis = lat.generator() * lat.scale();
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(xv.data(), n);
    const Eigen::VectorXd coeff = basis.inverse() * x;
    const Eigen::VectorXd babai = basis * coeff.array().round().matrix();
    const double radius = (x - babai).norm();
    const Enumeration e = enumerate_ball(lat, xv, radius);
    return {e.best.data(), e.best.data() + n};
}

}  // namespace modlat::oracle
