#pragma once

#include "zvlab/linalg.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace zvlab {

/// Uniform grid on [0, T] x [-L, L]^d, d in {1, 2}. n_x is odd so that x = 0
/// is a node.
struct SpaceTimeGrid {
    double T = 1.0;
    double L = 4.0;
    std::size_t n_t = 100;
    std::size_t n_x = 101;
    int d = 1;

    void validate() const;

    double dt() const { return T / static_cast<double>(n_t); }
    double dx() const { return 2.0 * L / static_cast<double>(n_x - 1); }
    double time(std::size_t k) const { return dt() * static_cast<double>(k); }
    double coord(std::size_t i) const { return -L + dx() * static_cast<double>(i); }
    std::size_t levels() const { return n_t + 1; }
    std::size_t nodes() const;

    /// Multi-index (axis-major, last axis fastest) of a flat node index.
    void unflatten(std::size_t node, std::size_t* idx) const;
    std::size_t flatten(const std::size_t* idx) const;
    Vec point(std::size_t node) const;
    bool on_boundary(std::size_t node) const;

    /// Same box, steps halved in time and space.
    SpaceTimeGrid refined() const;
};

/// Per-node values at every time level: values[(level * nodes + node) * width + c].
struct GridField {
    SpaceTimeGrid grid;
    int width = 1;
    std::vector<double> values;

    GridField() = default;
    GridField(const SpaceTimeGrid& g, int w);

    double& at(std::size_t level, std::size_t node, int c) {
        return values[(level * grid.nodes() + node) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)];
    }
    double at(std::size_t level, std::size_t node, int c) const {
        return values[(level * grid.nodes() + node) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)];
    }
    std::span<double> level(std::size_t k) {
        const std::size_t n = grid.nodes() * static_cast<std::size_t>(width);
        return {values.data() + k * n, n};
    }
    std::span<const double> level(std::size_t k) const {
        const std::size_t n = grid.nodes() * static_cast<std::size_t>(width);
        return {values.data() + k * n, n};
    }

    /// Multilinear interpolation in (t, x) of all components into out.
    /// Throws ExtrapolationError outside [0, T] x [-L, L]^d.
    void interpolate(double t, const Vec& x, std::span<double> out) const;

    /// Max |a - b| over all nodes of a shared grid.
    static double max_abs_diff(const GridField& a, const GridField& b);
};

/// Bilinear/trilinear interpolation weights of (t, x) on a grid.
struct GridStencil {
    std::size_t level = 0;
    double t_frac = 0.0;
    std::size_t cell[2] = {0, 0};
    double frac[2] = {0.0, 0.0};
};

GridStencil locate(const SpaceTimeGrid& grid, double t, const Vec& x);

}  // namespace zvlab
