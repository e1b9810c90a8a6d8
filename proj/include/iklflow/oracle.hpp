#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "iklflow/errors.hpp"

namespace iklflow {

/// Uniform 1D grid for trapezoid quadrature.
struct QuadratureGrid {
    double lo;
    double hi;
    long nodes;

    QuadratureGrid(double lo_, double hi_, long nodes_)
        : lo(lo_), hi(hi_), nodes(nodes_) {
        if (!(lo < hi)) { throw InputError("QuadratureGrid: lo must be < hi"); }
        if (nodes < 2) { throw InputError("QuadratureGrid: need >= 2 nodes"); }
    }
};

/// Trapezoid rule. Implemented against the raw closure; never routes
/// through the code paths it is used to validate.
inline double quad_integral(const std::function<double(double)> &f,
                            const QuadratureGrid &g) {
    const double h = (g.hi - g.lo) / static_cast<double>(g.nodes - 1);
    double acc = 0.0;
    for (long i = 0; i < g.nodes; ++i) {
        const double v = f(g.lo + h * static_cast<double>(i));
        if (!std::isfinite(v)) {
            throw NumericalError("quad_integral: non-finite value at node " +
                                 std::to_string(i));
        }
        acc += (i == 0 || i == g.nodes - 1) ? 0.5 * v : v;
    }
    return acc * h;
}

/// Central differences per coordinate.
inline Eigen::VectorXd finite_diff_grad(
    const std::function<double(const Eigen::VectorXd &)> &f,
    const Eigen::VectorXd &x, double h) {
    if (!(h > 0.0)) { throw InputError("finite_diff_grad: h must be positive"); }
    Eigen::VectorXd g(x.size());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
        Eigen::VectorXd xp = x, xm = x;
        xp[i] += h;
        xm[i] -= h;
        g[i] = (f(xp) - f(xm)) / (2.0 * h);
    }
    return g;
}

/// Exhaustive search over the simplex grid {w : w_i = n_i * resolution,
/// sum n_i = 1/resolution}. Guarded to m <= 4 atoms.
inline Eigen::VectorXd simplex_grid_argmin(
    const std::function<double(const Eigen::VectorXd &)> &objective, int m,
    double resolution) {
    if (m < 1 || m > 4) {
        throw ScaleError("simplex_grid_argmin: supports 1 <= m <= 4 atoms");
    }
    if (!(resolution > 0.0 && resolution <= 1.0)) {
        throw InputError("simplex_grid_argmin: resolution must be in (0, 1]");
    }
    const long k = std::lround(1.0 / resolution);
    Eigen::VectorXd best;
    double best_val = std::numeric_limits<double>::infinity();
    std::vector<long> counts(static_cast<std::size_t>(m), 0);
    // enumerate compositions of k into m parts
    std::function<void(int, long)> recurse = [&](int idx, long remaining) {
        if (idx == m - 1) {
            counts[static_cast<std::size_t>(idx)] = remaining;
            Eigen::VectorXd w(m);
            for (int i = 0; i < m; ++i) {
                w[i] = static_cast<double>(counts[static_cast<std::size_t>(i)]) /
                       static_cast<double>(k);
            }
            const double v = objective(w);
            if (v < best_val) {
                best_val = v;
                best = w;
            }
            return;
        }
        for (long c = 0; c <= remaining; ++c) {
            counts[static_cast<std::size_t>(idx)] = c;
            recurse(idx + 1, remaining - c);
        }
    };
    recurse(0, k);
    return best;
}

}  // namespace iklflow
