#include "zvlab/mixed_norm.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"
#include "zvlab/stats.hpp"

#include <cmath>
#include <numbers>
#include <vector>

namespace zvlab {

void MixedNormParams::validate() const {
    if (!(p > 2.0)) throw DomainError("mixed norm: spatial exponent p must satisfy p > 2 (got " + format_double(p) + ")");
    if (!(q > 2.0)) throw DomainError("mixed norm: temporal exponent q must satisfy q > 2 (got " + format_double(q) + ")");
    if (d < 1) throw DomainError("mixed norm: dimension d must be >= 1");
    if (!(T > 0.0)) throw DomainError("mixed norm: horizon T must be positive");
}

bool check_admissible(const MixedNormParams& params) {
    params.validate();
    return static_cast<double>(params.d) / params.p + 2.0 / params.q < 1.0;
}

namespace {

// Visits the midpoints of an n^d tensor grid on [-L, L]^d with cell volume.
template <typename Fn>
void for_each_midpoint(int d, double L, std::size_t n, Fn&& fn) {
    const double h = 2.0 * L / static_cast<double>(n);
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= n;
    Vec x(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (int a = d - 1; a >= 0; --a) {
            x(a) = -L + h * (static_cast<double>(rem % n) + 0.5);
            rem /= n;
        }
        fn(x);
    }
}

double midpoint_norm(const DriftField& f, const MixedNormParams& params, double L, std::size_t nt, std::size_t nx) {
    const double dt = params.T / static_cast<double>(nt);
    const double hx = 2.0 * L / static_cast<double>(nx);
    const double cell = std::pow(hx, params.d);
    std::vector<double> per_time(nt);
    parallel_for(nt, [&](std::size_t begin, std::size_t end) {
        std::vector<double> terms;
        for (std::size_t k = begin; k < end; ++k) {
            const double t = dt * (static_cast<double>(k) + 0.5);
            terms.clear();
            for_each_midpoint(params.d, L, nx, [&](const Vec& x) {
                const double v = f.checked(t, x).norm();
                terms.push_back(std::pow(v, params.p) * cell);
            });
            const double inner = pairwise_sum(terms);
            per_time[k] = std::pow(inner, params.q / params.p) * dt;
        }
    });
    return std::pow(pairwise_sum(per_time), 1.0 / params.q);
}

}  // namespace

NormEstimate mixed_norm(const DriftField& f, const MixedNormParams& params, const QuadratureSpec& quad) {
    params.validate();
    if (f.dim != params.d) throw DomainError("mixed_norm: field dimension does not match params.d");
    if (quad.time_cells == 0 || quad.space_cells == 0 || !(quad.half_width > 0.0)) {
        throw DomainError("mixed_norm: quadrature needs positive cells and half width");
    }
    double L = quad.half_width;
    if (f.support_radius) L = std::max(L, *f.support_radius);

    const double coarse = midpoint_norm(f, params, L, quad.time_cells, quad.space_cells);
    const double fine = midpoint_norm(f, params, L, 2 * quad.time_cells, 2 * quad.space_cells);
    return {fine, std::abs(fine - coarse)};
}

RunningCost gaussian_running_cost(const DriftField& f, double delta, const MixedNormParams& params,
                                  const RunningCostSpec& spec) {
    params.validate();
    if (!(delta >= 0.0)) throw DomainError("gaussian_running_cost: delta must be >= 0");
    const double power = 2.0 * (1.0 + delta);
    const double p_prime = params.p / power;
    const double q_prime = params.q / power;
    if (p_prime < 1.0 || !(q_prime > 1.0) || !(params.d / p_prime + 2.0 / q_prime < 2.0)) {
        throw DomainError("gaussian_running_cost: derived exponents p'=" + format_double(p_prime) +
                          ", q'=" + format_double(q_prime) + " violate d/p' + 2/q' < 2 with p' >= 1, q' > 1");
    }
    if (!(spec.s0 >= 0.0 && spec.s0 < params.T)) throw DomainError("gaussian_running_cost: need 0 <= s0 < T");

    const int d = params.d;
    const double U = 8.0;
    const double hu = 2.0 * U / static_cast<double>(spec.space_cells);
    const double ds = (params.T - spec.s0) / static_cast<double>(spec.time_cells);
    const double norm_const = std::pow(2.0 * std::numbers::pi, -0.5 * d);

    std::vector<double> per_time(spec.time_cells);
    std::vector<double> per_time_sup(spec.time_cells);
    parallel_for(spec.time_cells, [&](std::size_t begin, std::size_t end) {
        std::vector<double> terms;
        for (std::size_t k = begin; k < end; ++k) {
            const double s = spec.s0 + ds * (static_cast<double>(k) + 0.5);
            const double root = std::sqrt(s);
            double sup = 0.0;
            terms.clear();
            for_each_midpoint(d, U, spec.space_cells, [&](const Vec& u) {
                const double g = std::pow(f.checked(s, root * u).norm(), power);
                sup = std::max(sup, g);
                terms.push_back(g * norm_const * std::exp(-0.5 * u.squaredNorm()) * std::pow(hu, d));
            });
            per_time[k] = pairwise_sum(terms) * ds;
            per_time_sup[k] = sup;
        }
    });

    RunningCost out;
    const double head = std::pow(f.checked(0.0, Vec::Zero(d)).norm(), power) * spec.s0;
    out.value = pairwise_sum(per_time) + head;
    double sup = 0.0;
    for (double v : per_time_sup) sup = std::max(sup, v);
    out.omitted_bound = sup * spec.s0;
    return out;
}

}  // namespace zvlab
