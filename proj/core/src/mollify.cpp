#include "zvlab/mollify.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"

#include <cmath>
#include <memory>
#include <numbers>
#include <string>

namespace zvlab {

namespace {

// Mass of (1 - r^2)^4 over the unit ball in dimension d.
double unit_bump_mass(int d) {
    switch (d) {
        case 1: return 256.0 / 315.0;
        case 2: return std::numbers::pi / 5.0;
        default: {
            // |S^{d-1}| * B(d/2, 5) / 2
            const double sphere = 2.0 * std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d);
            return 0.5 * sphere * std::tgamma(0.5 * d) * std::tgamma(5.0) / std::tgamma(0.5 * d + 5.0);
        }
    }
}

}  // namespace

double bump_kernel(const Vec& x, double eps) {
    const double u2 = x.squaredNorm() / (eps * eps);
    if (u2 >= 1.0) return 0.0;
    const double w = 1.0 - u2;
    const int d = static_cast<int>(x.size());
    return w * w * w * w / (unit_bump_mass(d) * std::pow(eps, d));
}

double cutoff(double r, double R) {
    if (r <= R) return 1.0;
    if (r >= R + 1.0) return 0.0;
    const double s = r - R;
    // 1 - smoothstep_7(s): C^3 transition.
    const double s4 = s * s * s * s;
    return 1.0 - s4 * (35.0 + s * (-84.0 + s * (70.0 - 20.0 * s)));
}

double cutoff_derivative(double r, double R) {
    if (r <= R || r >= R + 1.0) return 0.0;
    const double s = r - R;
    const double s3 = s * s * s;
    return -140.0 * s3 * (1.0 - s) * (1.0 - s) * (1.0 - s);
}

int lattice_resolution(int dim) {
    switch (dim) {
        case 1: return 32;
        case 2: return 12;
        default: return 6;
    }
}

namespace {

// Normalized lattice convolution: sum_j w(x - y_j) b(y_j) / sum_j w(x - y_j),
// y_j on the fixed lattice h Z^d, w(z) = (1 - |z/eps|^2)^4.
std::pair<Vec, Mat> lattice_convolution(const DriftField& b, double t, const Vec& x, double eps) {
    const int d = b.dim;
    const int m = lattice_resolution(d);
    const double h = eps / m;
    long lo[kMaxDim];
    long count[kMaxDim];
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) {
        lo[a] = static_cast<long>(std::ceil((x(a) - eps) / h));
        const long hi = static_cast<long>(std::floor((x(a) + eps) / h));
        count[a] = std::max(0L, hi - lo[a] + 1);
        total *= static_cast<std::size_t>(count[a]);
    }

    double mass = 0.0;
    Vec mass_grad = Vec::Zero(d);
    Vec acc = Vec::Zero(d);
    Mat acc_grad = Mat::Zero(d, d);
    Vec y(d);
    for (std::size_t idx = 0; idx < total; ++idx) {
        std::size_t rem = idx;
        for (int a = d - 1; a >= 0; --a) {
            y(a) = h * static_cast<double>(lo[a] + static_cast<long>(rem % static_cast<std::size_t>(count[a])));
            rem /= static_cast<std::size_t>(count[a]);
        }
        const Vec z = x - y;
        const double u2 = z.squaredNorm() / (eps * eps);
        if (u2 >= 1.0) continue;
        const double w1 = 1.0 - u2;
        const double w = w1 * w1 * w1 * w1;
        const Vec dw = (-8.0 * w1 * w1 * w1 / (eps * eps)) * z;
        const Vec by = b.checked(t, y);
        mass += w;
        mass_grad += dw;
        acc += w * by;
        acc_grad += by * dw.transpose();
    }
    if (mass <= 0.0) throw NumericalError("mollify: empty lattice neighbourhood");
    const Vec value = acc / mass;
    const Mat grad = (acc_grad - value * mass_grad.transpose()) / mass;
    return {value, grad};
}

}  // namespace

DriftField mollify(const DriftField& b, double eps) {
    if (!(eps > 0.0) || !std::isfinite(eps)) throw DomainError("mollify: bandwidth must be positive");
    const double R = 1.0 / eps;
    const int d = b.dim;

    ConvolutionFn conv = b.convolve;
    if (!conv) {
        conv = [base = b](double t, const Vec& x, double e) { return lattice_convolution(base, t, x, e); };
    }

    auto value_and_grad = [conv, eps, R, d](double t, const Vec& x) -> std::pair<Vec, Mat> {
        const double r = x.norm();
        if (r >= R + 1.0) return {Vec::Zero(d), Mat::Zero(d, d)};
        auto [v, j] = conv(t, x, eps);
        const double chi = cutoff(r, R);
        if (r <= R) return {v, j};
        const Vec dchi = r > 0.0 ? Vec((cutoff_derivative(r, R) / r) * x) : Vec(Vec::Zero(d));
        return {chi * v, chi * j + v * dchi.transpose()};
    };

    DriftField out;
    out.dim = d;
    out.eval = [value_and_grad](double t, const Vec& x) -> Vec { return value_and_grad(t, x).first; };
    out.grad = [value_and_grad](double t, const Vec& x) -> Mat { return value_and_grad(t, x).second; };
    out.smooth = true;
    out.autonomous = b.autonomous;
    out.support_radius = R + 1.0;
    if (b.support_radius) out.support_radius = std::min(*out.support_radius, *b.support_radius + eps);
    out.sup_bound = b.sup_bound;
    out.label = "mollified(" + b.label + ",eps=" + format_double(eps) + ")";
    return out;
}

std::vector<double> halving_bandwidths(double first, std::size_t count) {
    std::vector<double> out(count);
    for (std::size_t n = 0; n < count; ++n) out[n] = std::ldexp(first, -static_cast<int>(n));
    return out;
}

MollifiedFamily make_family(const DriftField& b, std::vector<double> bandwidths) {
    for (std::size_t n = 0; n < bandwidths.size(); ++n) {
        if (!(bandwidths[n] > 0.0)) throw DomainError("make_family: bandwidths must be positive");
        if (n > 0 && !(bandwidths[n] < bandwidths[n - 1])) {
            throw DomainError("make_family: bandwidths must be strictly decreasing");
        }
    }
    MollifiedFamily fam;
    fam.base = b;
    fam.bandwidths = std::move(bandwidths);
    for (double eps : fam.bandwidths) fam.members.push_back(mollify(b, eps));
    return fam;
}

ConvergenceGap convergence_gap(const DriftField& b, const DriftField& b_n, double eps,
                               const BrownianEnsemble& ens, const GapSpec& spec) {
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("convergence_gap: eps must lie in (0, 1)");
    if (b.dim != b_n.dim || b.dim != ens.dim() || spec.x0.size() != b.dim) {
        throw DomainError("convergence_gap: dimension mismatch");
    }
    const double p_eps = 1.0 + eps;
    const int d = b.dim;
    const std::size_t steps = ens.steps();
    const double dt = ens.dt();
    std::vector<double> per_path(ens.paths());

    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(steps * static_cast<std::size_t>(d));
        std::vector<double> diff2(static_cast<std::size_t>(d));
        std::vector<double> sqgap(static_cast<std::size_t>(d));
        for (std::size_t i = begin; i < end; ++i) {
            ens.path_increments(i, inc);
            Vec x = spec.x0;
            std::fill(diff2.begin(), diff2.end(), 0.0);
            std::fill(sqgap.begin(), sqgap.end(), 0.0);
            for (std::size_t k = 0; k < steps; ++k) {
                const double t = ens.time(k);
                const Vec v = b.eval(t, x);
                const Vec vn = b_n.eval(t, x);
                for (int j = 0; j < d; ++j) {
                    const double g = vn(j) - v(j);
                    if (!std::isfinite(g)) {
                        throw EvaluationError("convergence_gap: non-finite integrand on path " + std::to_string(i) +
                                              " at step " + std::to_string(k));
                    }
                    diff2[static_cast<std::size_t>(j)] += g * g * dt;
                    sqgap[static_cast<std::size_t>(j)] += (v(j) * v(j) - vn(j) * vn(j)) * dt;
                }
                for (int j = 0; j < d; ++j) x(j) += inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
            }
            double J = 0.0;
            for (int j = 0; j < d; ++j) {
                J += 2.0 * std::pow(std::abs(diff2[static_cast<std::size_t>(j)]), 0.5 * p_eps) +
                     std::pow(std::abs(sqgap[static_cast<std::size_t>(j)]), p_eps);
            }
            per_path[i] = J;
        }
    });

    const EstimatorResult r = summarize(per_path, 1);
    return {spec.n, r.mean[0], r.stderr_[0]};
}

}  // namespace zvlab
