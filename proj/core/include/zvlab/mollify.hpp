#pragma once

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/stats.hpp"

#include <vector>

namespace zvlab {

/// Normalized radial bump k(x) = c_d (1 - |x/eps|^2)^4 on |x| <= eps.
double bump_kernel(const Vec& x, double eps);

/// Smooth radial cutoff: 1 on |x| <= R, 0 on |x| >= R + 1, C^3 in between.
double cutoff(double r, double R);
double cutoff_derivative(double r, double R);

/// Spatial mollification of b at bandwidth eps, multiplied by the cutoff at
/// radius 1/eps. Uses b.convolve when the field provides a closed form;
/// otherwise a normalized lattice sum of the kernel at spacing eps/m, whose
/// weights reproduce constants exactly and whose gradient is the analytic
/// derivative of the same sum.
DriftField mollify(const DriftField& b, double eps);

/// Lattice points per bandwidth used by the generic path.
int lattice_resolution(int dim);

/// b_n = mollify(b, eps_n) for a decreasing bandwidth sequence.
struct MollifiedFamily {
    DriftField base;
    std::vector<double> bandwidths;
    std::vector<DriftField> members;

    std::size_t size() const noexcept { return members.size(); }
    const DriftField& operator[](std::size_t n) const { return members.at(n); }
};

/// Throws DomainError unless bandwidths are positive and strictly decreasing.
MollifiedFamily make_family(const DriftField& b, std::vector<double> bandwidths);

/// eps_n = first * 2^{-(n-1)}, n = 1..count.
std::vector<double> halving_bandwidths(double first, std::size_t count);

/// Monte Carlo estimate of E[J_n] along Brownian paths from x0.
struct ConvergenceGap {
    std::size_t n = 0;
    double j_n = 0.0;
    double stderr_ = 0.0;
};

struct GapSpec {
    Vec x0;
    std::size_t n = 0;  ///< family index carried into the result
};

/// J_n = sum_j 2 |int (b_n - b)_j^2 ds|^{p_eps/2} + |int (b_j^2 - b_n,j^2) ds|^{p_eps},
/// p_eps = 1 + eps, integrals along x0 + B by left-point sums.
ConvergenceGap convergence_gap(const DriftField& b, const DriftField& b_n, double eps,
                               const BrownianEnsemble& ens, const GapSpec& spec);

}  // namespace zvlab
