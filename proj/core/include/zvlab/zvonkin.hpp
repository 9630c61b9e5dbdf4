#pragma once

#include "zvlab/drift.hpp"
#include "zvlab/grid.hpp"
#include "zvlab/mixed_norm.hpp"

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace zvlab {

struct PdeOptions {
    int substeps = 1;  ///< inner time steps per stored level
};

struct PdeSolution {
    GridField u;
    std::vector<std::string> warnings;
    double max_cfl = 0.0;
};

/// Discrete solution of d_t u + 1/2 Lap u + b . grad u - lambda u + phi = 0,
/// u(T, .) = 0, u = 0 on the box boundary, marched backward from T.
PdeSolution solve_backward_pde(const DriftField& b, const DriftField& phi, double lambda,
                               const SpaceTimeGrid& grid, const PdeOptions& opts = {});

/// Max over interior coarse nodes of |u_h - u_{h/2}| (steps halved in t and x).
double richardson_estimate(const DriftField& b, const DriftField& phi, double lambda, const SpaceTimeGrid& grid,
                           const PdeOptions& opts = {});

/// support_radius + 4 sqrt(T); throws DomainError for fields without support.
double recommended_half_width(const DriftField& b, double T);

struct ZvonkinDiagnostics {
    double sup_grad_u = 0.0;          ///< max operator norm of grad U over all nodes
    double sup_grad_gamma_inv = 0.0;  ///< max ||(I + grad U)^{-1}|| over all nodes
    bool injective = true;            ///< x + U strictly increasing along every axis slice
};

/// The Zvonkin transform gamma(t, x) = x + U(t, x), U solving the backward
/// system with phi = b. Immutable after construction.
struct ZvonkinSolution {
    GridField U;      ///< width d
    GridField gradU;  ///< width d*d, entry (i, j) = d U_i / d x_j at offset i*d + j
    GridField hessU;  ///< width d^3, (i, j, k) = d^2 U_i / dx_j dx_k at (i*d + j)*d + k
    double lambda = 1.0;
    std::vector<std::pair<double, double>> trace;  ///< (lambda, sup ||grad U||) per tried lambda
    ZvonkinDiagnostics diagnostics;
    std::vector<std::string> warnings;

    const SpaceTimeGrid& grid() const noexcept { return U.grid; }
    int dim() const noexcept { return U.grid.d; }

    Vec value(double t, const Vec& x) const;
    Mat gradient(double t, const Vec& x) const;
    /// Hessian tensor flattened as in hessU.
    void hessian(double t, const Vec& x, std::span<double> out) const;
};

/// Differentiates U on the grid and fills the diagnostics.
ZvonkinSolution build_zvonkin(GridField U, double lambda);

/// lambda = 1, 2, 4, ... until sup ||grad U|| <= target. Throws
/// CalibrationError carrying the trace if lambda would exceed 2^20.
ZvonkinSolution calibrate_lambda(const DriftField& b, const SpaceTimeGrid& grid, double target = 0.5,
                                 const PdeOptions& opts = {});

/// x + U(t, x), multilinear interpolation of U.
Vec gamma_forward(const ZvonkinSolution& sol, double t, const Vec& x);

struct InverseOptions {
    double tolerance = 1e-10;
    int max_iterations = 200;
};

/// Fixed point x <- y - U(t, x) from start (default y) until |gamma(x) - y| <= tol.
Vec gamma_inverse(const ZvonkinSolution& sol, double t, const Vec& y, const InverseOptions& opts = {});
Vec gamma_inverse(const ZvonkinSolution& sol, double t, const Vec& y, const Vec& start,
                  const InverseOptions& opts = {});

/// Central finite-difference Jacobian of gamma^{-1}(t, .) at y.
Mat gamma_inverse_jacobian(const ZvonkinSolution& sol, double t, const Vec& y, double h = 1e-4);

struct HolderStats {
    double time_ratio_max = 0.0;   ///< max ||gradU(t,x) - gradU(s,x)|| / |t - s|^{eps/2}
    double space_ratio_max = 0.0;  ///< max ||gradU(t,x) - gradU(t,y)|| / |x - y|^eps
    std::size_t time_pairs = 0;
    std::size_t space_pairs = 0;
};

/// Empirical Hoelder ratios of grad U over node pairs at dyadic physical
/// separations. Requires eps + d/p + 2/q < 1.
HolderStats holder_diagnostics(const ZvonkinSolution& sol, double eps, const MixedNormParams& params);

/// CSV with columns t,x1..xd,U1..Ud, one row per (level, node).
void write_solution_csv(const ZvonkinSolution& sol, const std::filesystem::path& path);

/// Rebuilds the grid from the file and re-derives gradients.
ZvonkinSolution read_solution_csv(const std::filesystem::path& path, double lambda);

/// Flat key=value report of diagnostics.
std::string diagnostics_report(const ZvonkinSolution& sol);

}  // namespace zvlab
