#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "pmq/dist1d.hpp"
#include "pmq/errors.hpp"

namespace pmq {

/// A one-dimensional quantizer: strictly increasing codewords, optional
/// weights (populated after optimization) and the interval the codewords
/// are constrained to live in.
struct Grid1D {
    std::vector<double> codewords;
    std::vector<double> weights; // empty until populated
    Interval support;

    std::size_t size() const { return codewords.size(); }
};

inline void validate_grid(const Grid1D& g) {
    if (g.codewords.empty()) throw invalid_grid_error("grid has no codewords");
    for (std::size_t i = 0; i < g.codewords.size(); ++i) {
        const double x = g.codewords[i];
        if (!std::isfinite(x)) throw invalid_grid_error("non-finite codeword");
        if (i > 0 && !(g.codewords[i - 1] < x))
            throw invalid_grid_error("codewords not strictly increasing");
        if (!g.support.contains(x)) throw invalid_grid_error("codeword outside support");
    }
    if (!g.weights.empty() && g.weights.size() != g.codewords.size())
        throw invalid_grid_error("weight/codeword length mismatch");
}

/// N+1 region boundaries: interior entries are neighbour midpoints, the
/// outer ones are the support bounds (infinite for an unbounded support).
inline std::vector<double> region_boundaries(const Grid1D& g) {
    validate_grid(g);
    const std::size_t n = g.size();
    std::vector<double> b(n + 1);
    b[0] = g.support.lo;
    b[n] = g.support.hi;
    for (std::size_t i = 1; i < n; ++i)
        b[i] = 0.5 * (g.codewords[i - 1] + g.codewords[i]);
    return b;
}

/// Per-codeword region edges (x^{i-}, x^{i+}), outermost edges clipped to
/// the grid support.
inline std::vector<std::pair<double, double>> region_edges(const Grid1D& g) {
    const auto b = region_boundaries(g);
    std::vector<std::pair<double, double>> edges(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) edges[i] = {b[i], b[i + 1]};
    return edges;
}

namespace detail {

/// Boundaries used when assigning probability mass: interior midpoints as
/// above, but the outer edges extend over the full line so that mass outside
/// the grid support projects onto the extreme codewords.
inline std::vector<double> mass_boundaries(const Grid1D& g) {
    auto b = region_boundaries(g);
    b.front() = -std::numeric_limits<double>::infinity();
    b.back() = std::numeric_limits<double>::infinity();
    return b;
}

} // namespace detail

} // namespace pmq
