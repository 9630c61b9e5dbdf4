#include "zvlab/parabolic.hpp"

#include "zvlab/error.hpp"
#include "zvlab/stats.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cmath>

namespace zvlab {

namespace {

void evaluate_drift(const SpaceTimeGrid& grid, const DriftField& b, double t, std::vector<double>& out) {
    const std::size_t n = grid.nodes();
    const auto d = static_cast<std::size_t>(grid.d);
    out.resize(n * d);
    for (std::size_t node = 0; node < n; ++node) {
        const Vec v = b.checked(t, grid.point(node));
        for (std::size_t a = 0; a < d; ++a) out[node * d + a] = v(static_cast<Eigen::Index>(a));
    }
}

}  // namespace

ParabolicResult solve_parabolic(const SpaceTimeGrid& grid, const ParabolicSpec& spec) {
    grid.validate();
    if (spec.width < 1) throw DomainError("solve_parabolic: width must be positive");
    if (spec.substeps < 1) throw DomainError("solve_parabolic: substeps must be positive");
    if (spec.advection && spec.advection->dim != grid.d) {
        throw DomainError("solve_parabolic: drift dimension does not match the grid");
    }

    ParabolicResult result;
    result.field = GridField(grid, spec.width);
    GridField& u = result.field;

    const std::size_t n = grid.nodes();
    const auto d = static_cast<std::size_t>(grid.d);
    const auto w = static_cast<std::size_t>(spec.width);
    const double h = grid.dx();
    const double dtau = grid.dt() / spec.substeps;
    const bool backward = spec.direction == TimeDirection::Backward;

    // Interior numbering and node neighbours (axis a, direction -/+).
    std::vector<long> interior_id(n, -1);
    std::vector<std::size_t> interior;
    for (std::size_t node = 0; node < n; ++node) {
        if (!grid.on_boundary(node)) {
            interior_id[node] = static_cast<long>(interior.size());
            interior.push_back(node);
        }
    }
    const std::size_t stride[2] = {d == 1 ? 1 : grid.n_x, 1};
    auto neighbour = [&](std::size_t node, std::size_t axis, int dir) {
        const std::size_t s = stride[d == 1 ? 1 : axis];
        return dir > 0 ? node + s : node - s;
    };

    // Implicit operator on interior unknowns: I + dtau (reaction - 1/2 Lap_h).
    const double off = -0.5 * dtau / (h * h);
    const double diag = 1.0 + dtau * spec.reaction + dtau * static_cast<double>(d) / (h * h);
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(interior.size() * (1 + 2 * d));
    for (std::size_t r = 0; r < interior.size(); ++r) {
        const std::size_t node = interior[r];
        triplets.emplace_back(static_cast<int>(r), static_cast<int>(r), diag);
        for (std::size_t a = 0; a < d; ++a) {
            for (int dir : {-1, 1}) {
                const long c = interior_id[neighbour(node, a, dir)];
                if (c >= 0) triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), off);
            }
        }
    }
    Eigen::SparseMatrix<double> A(static_cast<Eigen::Index>(interior.size()), static_cast<Eigen::Index>(interior.size()));
    A.setFromTriplets(triplets.begin(), triplets.end());
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(A);
    if (solver.info() != Eigen::Success) throw NumericalError("solve_parabolic: factorization failed");

    // Starting level.
    const std::size_t first = backward ? grid.n_t : 0;
    std::vector<double> cur(n * w, 0.0), next(n * w, 0.0), tmp(w);
    const double t_first = grid.time(first);
    if (spec.start) {
        for (std::size_t node = 0; node < n; ++node) {
            spec.start(t_first, grid.point(node), std::span<double>(cur.data() + node * w, w));
        }
    }
    std::copy(cur.begin(), cur.end(), u.level(first).begin());

    std::vector<double> bvals;
    const bool frozen_drift = spec.advection && spec.advection->autonomous;
    if (frozen_drift) evaluate_drift(grid, *spec.advection, t_first, bvals);

    Eigen::VectorXd rhs(static_cast<Eigen::Index>(interior.size()));
    Eigen::VectorXd sol(static_cast<Eigen::Index>(interior.size()));
    std::vector<double> src(n * w, 0.0);
    bool cfl_warned = false;

    const std::size_t total_steps = grid.n_t * static_cast<std::size_t>(spec.substeps);
    for (std::size_t s = 0; s < total_steps; ++s) {
        const double tau_old = dtau * static_cast<double>(s);
        const double tau_new = dtau * static_cast<double>(s + 1);
        const double t_old = backward ? grid.T - tau_old : tau_old;
        const double t_new = backward ? grid.T - tau_new : tau_new;

        if (spec.advection && !frozen_drift) evaluate_drift(grid, *spec.advection, t_old, bvals);
        if (spec.advection) {
            double cfl = 0.0;
            for (std::size_t node = 0; node < n; ++node) {
                double c = 0.0;
                for (std::size_t a = 0; a < d; ++a) c += std::abs(bvals[node * d + a]);
                cfl = std::max(cfl, c * dtau / h);
            }
            result.max_cfl = std::max(result.max_cfl, cfl);
            if (cfl > 1.0 && !cfl_warned) {
                cfl_warned = true;
                result.warnings.push_back("advection CFL number " + format_double(cfl) + " exceeds 1 at t=" +
                                          format_double(t_old) + "; suggested dt <= " +
                                          format_double(grid.dt() / cfl));
            }
        }
        if (spec.source) {
            for (std::size_t node = 0; node < n; ++node) {
                spec.source(t_old, grid.point(node), std::span<double>(src.data() + node * w, w));
            }
        }

        // New boundary values.
        for (std::size_t node = 0; node < n; ++node) {
            if (interior_id[node] >= 0) continue;
            if (spec.boundary) {
                spec.boundary(t_new, grid.point(node), std::span<double>(next.data() + node * w, w));
            } else {
                std::fill_n(next.data() + node * w, w, 0.0);
            }
        }

        for (std::size_t c = 0; c < w; ++c) {
            for (std::size_t r = 0; r < interior.size(); ++r) {
                const std::size_t node = interior[r];
                const double uc = cur[node * w + c];
                double adv = 0.0;
                double coupling = 0.0;
                for (std::size_t a = 0; a < d; ++a) {
                    const std::size_t lo = neighbour(node, a, -1);
                    const std::size_t hi = neighbour(node, a, 1);
                    if (spec.advection) {
                        const double ba = bvals[node * d + a];
                        adv += ba > 0.0 ? ba * (cur[hi * w + c] - uc) / h : ba * (uc - cur[lo * w + c]) / h;
                    }
                    if (interior_id[lo] < 0) coupling += next[lo * w + c];
                    if (interior_id[hi] < 0) coupling += next[hi * w + c];
                }
                rhs(static_cast<Eigen::Index>(r)) =
                    uc + dtau * (adv + src[node * w + c]) + 0.5 * dtau / (h * h) * coupling;
            }
            sol = solver.solve(rhs);
            for (std::size_t r = 0; r < interior.size(); ++r) next[interior[r] * w + c] = sol(static_cast<Eigen::Index>(r));
        }

        const bool store = (s + 1) % static_cast<std::size_t>(spec.substeps) == 0;
        const std::size_t steps_done = (s + 1) / static_cast<std::size_t>(spec.substeps);
        const std::size_t level = backward ? grid.n_t - steps_done : steps_done;
        for (double v : next) {
            if (!std::isfinite(v)) {
                throw NumericalError("solve_parabolic: non-finite value at time level t=" + format_double(t_new) +
                                     (store ? " (level " + std::to_string(level) + ")" : ""));
            }
        }
        std::swap(cur, next);
        if (store) std::copy(cur.begin(), cur.end(), u.level(level).begin());
    }
    return result;
}

}  // namespace zvlab
