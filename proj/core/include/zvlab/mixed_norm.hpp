#pragma once

#include "zvlab/drift.hpp"

namespace zvlab {

/// Exponents and geometry of the mixed space L^q([0,T], L^p(R^d)).
struct MixedNormParams {
    double p = 4.0;  ///< spatial exponent, > 2
    double q = 4.0;  ///< temporal exponent, > 2
    int d = 1;
    double T = 1.0;

    /// Throws DomainError naming the first violated bound.
    void validate() const;
};

/// True iff d/p + 2/q < 1. Rejects p <= 2 or q <= 2.
bool check_admissible(const MixedNormParams& params);

/// Composite midpoint tensor rule on [0, T] x [-L, L]^d.
struct QuadratureSpec {
    double half_width = 4.0;
    std::size_t time_cells = 64;
    std::size_t space_cells = 256;  ///< per axis
};

struct NormEstimate {
    double value = 0.0;           ///< result at the finer of two resolutions
    double error_estimate = 0.0;  ///< |fine - coarse|, an upper proxy for the fine error
};

/// (int_0^T (int |f(t,x)|^p dx)^{q/p} dt)^{1/q}, |.| the Euclidean norm.
/// The box is widened to cover f.support_radius when that is set.
NormEstimate mixed_norm(const DriftField& f, const MixedNormParams& params, const QuadratureSpec& quad = {});

struct RunningCostSpec {
    double s0 = 1e-3;             ///< small-time cutoff
    std::size_t time_cells = 200;
    std::size_t space_cells = 400;  ///< per axis, in standard-normal units on [-8, 8]
};

struct RunningCost {
    double value = 0.0;
    double omitted_bound = 0.0;  ///< bound on the [0, s0] contribution: s0 * sup |f|^{2(1+delta)}
};

/// E[int_0^T |f(s, B_s)|^{2(1+delta)} ds], B a standard Brownian motion from 0.
/// Quadrature against the Gaussian density on [s0, T]; the [0, s0] piece is
/// approximated by s0 |f(0,0)|^{2(1+delta)}. Requires the derived exponents
/// p' = p/(2(1+delta)), q' = q/(2(1+delta)) to satisfy d/p' + 2/q' < 2.
RunningCost gaussian_running_cost(const DriftField& f, double delta, const MixedNormParams& params,
                                  const RunningCostSpec& spec = {});

}  // namespace zvlab
