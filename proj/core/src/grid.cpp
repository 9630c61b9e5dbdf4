#include "zvlab/grid.hpp"

#include "zvlab/error.hpp"
#include "zvlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace zvlab {

void SpaceTimeGrid::validate() const {
    if (d != 1 && d != 2) throw DomainError("SpaceTimeGrid: only d = 1 or d = 2 is supported");
    if (!(T > 0.0) || !(L > 0.0)) throw DomainError("SpaceTimeGrid: T and L must be positive");
    if (n_t == 0) throw DomainError("SpaceTimeGrid: n_t must be positive");
    if (n_x < 3 || n_x % 2 == 0) throw DomainError("SpaceTimeGrid: n_x must be odd and >= 3");
}

std::size_t SpaceTimeGrid::nodes() const { return d == 1 ? n_x : n_x * n_x; }

void SpaceTimeGrid::unflatten(std::size_t node, std::size_t* idx) const {
    if (d == 1) {
        idx[0] = node;
    } else {
        idx[0] = node / n_x;
        idx[1] = node % n_x;
    }
}

std::size_t SpaceTimeGrid::flatten(const std::size_t* idx) const {
    return d == 1 ? idx[0] : idx[0] * n_x + idx[1];
}

Vec SpaceTimeGrid::point(std::size_t node) const {
    std::size_t idx[2] = {0, 0};
    unflatten(node, idx);
    Vec x(d);
    for (int a = 0; a < d; ++a) x(a) = coord(idx[a]);
    return x;
}

bool SpaceTimeGrid::on_boundary(std::size_t node) const {
    std::size_t idx[2] = {0, 0};
    unflatten(node, idx);
    for (int a = 0; a < d; ++a) {
        if (idx[a] == 0 || idx[a] + 1 == n_x) return true;
    }
    return false;
}

SpaceTimeGrid SpaceTimeGrid::refined() const {
    SpaceTimeGrid g = *this;
    g.n_t = 2 * n_t;
    g.n_x = 2 * n_x - 1;
    return g;
}

GridField::GridField(const SpaceTimeGrid& g, int w) : grid(g), width(w) {
    grid.validate();
    values.assign(grid.levels() * grid.nodes() * static_cast<std::size_t>(w), 0.0);
}

GridStencil locate(const SpaceTimeGrid& grid, double t, const Vec& x) {
    const double tol = 1e-12 * std::max(1.0, grid.T);
    if (!(t >= -tol && t <= grid.T + tol)) {
        throw ExtrapolationError("time " + format_double(t) + " outside [0, " + format_double(grid.T) + "]");
    }
    GridStencil s;
    const double tk = std::clamp(t, 0.0, grid.T) / grid.dt();
    s.level = std::min(static_cast<std::size_t>(tk), grid.n_t - 1);
    s.t_frac = tk - static_cast<double>(s.level);
    const double h = grid.dx();
    for (int a = 0; a < grid.d; ++a) {
        const double xa = x(a);
        if (!(xa >= -grid.L - 1e-12 * grid.L && xa <= grid.L + 1e-12 * grid.L)) {
            throw ExtrapolationError("point coordinate " + format_double(xa) + " outside box [-" +
                                     format_double(grid.L) + ", " + format_double(grid.L) + "]");
        }
        const double u = (std::clamp(xa, -grid.L, grid.L) + grid.L) / h;
        s.cell[a] = std::min(static_cast<std::size_t>(u), grid.n_x - 2);
        s.frac[a] = u - static_cast<double>(s.cell[a]);
    }
    return s;
}

void GridField::interpolate(double t, const Vec& x, std::span<double> out) const {
    const GridStencil s = locate(grid, t, x);
    std::fill(out.begin(), out.end(), 0.0);
    const int corners = 1 << grid.d;
    const std::size_t w = static_cast<std::size_t>(width);
    for (int tk = 0; tk < 2; ++tk) {
        const double wt = tk ? s.t_frac : 1.0 - s.t_frac;
        if (wt == 0.0) continue;
        const std::size_t lvl = s.level + static_cast<std::size_t>(tk);
        for (int c = 0; c < corners; ++c) {
            double wc = wt;
            std::size_t idx[2] = {0, 0};
            for (int a = 0; a < grid.d; ++a) {
                const int bit = (c >> a) & 1;
                idx[a] = s.cell[a] + static_cast<std::size_t>(bit);
                wc *= bit ? s.frac[a] : 1.0 - s.frac[a];
            }
            if (wc == 0.0) continue;
            const double* v = values.data() + (lvl * grid.nodes() + grid.flatten(idx)) * w;
            for (std::size_t k = 0; k < w; ++k) out[k] += wc * v[k];
        }
    }
}

double GridField::max_abs_diff(const GridField& a, const GridField& b) {
    if (a.values.size() != b.values.size()) throw DomainError("max_abs_diff: grid mismatch");
    double m = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) m = std::max(m, std::abs(a.values[i] - b.values[i]));
    return m;
}

}  // namespace zvlab
