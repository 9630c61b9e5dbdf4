#include "zvlab/zvonkin.hpp"

#include "zvlab/csv.hpp"
#include "zvlab/error.hpp"
#include "zvlab/parabolic.hpp"
#include "zvlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace zvlab {

PdeSolution solve_backward_pde(const DriftField& b, const DriftField& phi, double lambda,
                               const SpaceTimeGrid& grid, const PdeOptions& opts) {
    if (!(lambda > 0.0)) throw DomainError("solve_backward_pde: lambda must be positive");
    if (b.dim != grid.d || phi.dim != grid.d) throw DomainError("solve_backward_pde: dimension mismatch");
    ParabolicSpec spec;
    spec.advection = &b;
    spec.reaction = lambda;
    spec.width = grid.d;
    spec.direction = TimeDirection::Backward;
    spec.substeps = opts.substeps;
    spec.source = [&phi](double t, const Vec& x, std::span<double> out) {
        const Vec v = phi.checked(t, x);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = v(static_cast<Eigen::Index>(i));
    };
    ParabolicResult r = solve_parabolic(grid, spec);
    return {std::move(r.field), std::move(r.warnings), r.max_cfl};
}

double richardson_estimate(const DriftField& b, const DriftField& phi, double lambda, const SpaceTimeGrid& grid,
                           const PdeOptions& opts) {
    const PdeSolution coarse = solve_backward_pde(b, phi, lambda, grid, opts);
    const PdeSolution fine = solve_backward_pde(b, phi, lambda, grid.refined(), opts);
    const SpaceTimeGrid& g = grid;
    const SpaceTimeGrid& gf = fine.u.grid;
    double worst = 0.0;
    for (std::size_t k = 0; k <= g.n_t; ++k) {
        for (std::size_t node = 0; node < g.nodes(); ++node) {
            if (g.on_boundary(node)) continue;
            std::size_t idx[2], fidx[2];
            g.unflatten(node, idx);
            for (int a = 0; a < g.d; ++a) fidx[a] = 2 * idx[a];
            const std::size_t fnode = gf.flatten(fidx);
            for (int c = 0; c < g.d; ++c) {
                worst = std::max(worst, std::abs(coarse.u.at(k, node, c) - fine.u.at(2 * k, fnode, c)));
            }
        }
    }
    return worst;
}

double recommended_half_width(const DriftField& b, double T) {
    if (!b.support_radius) {
        throw DomainError("recommended_half_width: drift '" + b.label + "' has no support radius");
    }
    return *b.support_radius + 4.0 * std::sqrt(T);
}

namespace {

// d/dx_axis of a width-w field at one level, central inside, one-sided at the edges.
void differentiate(const GridField& src, std::size_t level, int axis, GridField& dst, int dst_offset, int dst_stride) {
    const SpaceTimeGrid& g = src.grid;
    const double h = g.dx();
    for (std::size_t node = 0; node < g.nodes(); ++node) {
        std::size_t idx[2] = {0, 0};
        g.unflatten(node, idx);
        std::size_t lo[2] = {idx[0], idx[1]}, hi[2] = {idx[0], idx[1]};
        double span = 2.0 * h;
        if (idx[axis] == 0) {
            hi[axis] = 1;
            span = h;
        } else if (idx[axis] + 1 == g.n_x) {
            lo[axis] = g.n_x - 2;
            span = h;
        } else {
            lo[axis] = idx[axis] - 1;
            hi[axis] = idx[axis] + 1;
        }
        const std::size_t nlo = g.flatten(lo), nhi = g.flatten(hi);
        for (int c = 0; c < src.width; ++c) {
            dst.at(level, node, dst_offset + c * dst_stride) = (src.at(level, nhi, c) - src.at(level, nlo, c)) / span;
        }
    }
}

}  // namespace

ZvonkinSolution build_zvonkin(GridField U, double lambda) {
    const SpaceTimeGrid g = U.grid;
    const int d = g.d;
    if (U.width != d) throw DomainError("build_zvonkin: U must have d components");

    ZvonkinSolution sol;
    sol.lambda = lambda;
    sol.gradU = GridField(g, d * d);
    sol.hessU = GridField(g, d * d * d);
    for (std::size_t k = 0; k <= g.n_t; ++k) {
        // gradU(i, j) at offset i*d + j: differentiate U along axis j.
        for (int j = 0; j < d; ++j) differentiate(U, k, j, sol.gradU, j, d);
        // hessU(i, j, m) at (i*d + j)*d + m: differentiate gradU along axis m.
        for (int m = 0; m < d; ++m) differentiate(sol.gradU, k, m, sol.hessU, m, d);
    }

    ZvonkinDiagnostics diag;
    Mat G(d, d);
    for (std::size_t k = 0; k <= g.n_t; ++k) {
        for (std::size_t node = 0; node < g.nodes(); ++node) {
            for (int i = 0; i < d; ++i) {
                for (int j = 0; j < d; ++j) G(i, j) = sol.gradU.at(k, node, i * d + j);
            }
            diag.sup_grad_u = std::max(diag.sup_grad_u, operator_norm(G));
            const Mat J = Mat::Identity(d, d) + G;
            const double det = J.determinant();
            if (det != 0.0) {
                diag.sup_grad_gamma_inv = std::max(diag.sup_grad_gamma_inv, operator_norm(Mat(J.inverse())));
            } else {
                diag.sup_grad_gamma_inv = std::numeric_limits<double>::infinity();
            }
        }
        // Strict monotonicity of x_a + U_a along each axis slice.
        for (std::size_t node = 0; node < g.nodes() && diag.injective; ++node) {
            std::size_t idx[2] = {0, 0};
            g.unflatten(node, idx);
            for (int a = 0; a < d; ++a) {
                if (idx[a] + 1 == g.n_x) continue;
                std::size_t nx[2] = {idx[0], idx[1]};
                nx[a] += 1;
                const std::size_t next = g.flatten(nx);
                const double here = g.coord(idx[a]) + U.at(k, node, a);
                const double there = g.coord(nx[a]) + U.at(k, next, a);
                if (!(there > here)) {
                    diag.injective = false;
                    break;
                }
            }
        }
    }
    sol.diagnostics = diag;
    sol.U = std::move(U);
    return sol;
}

ZvonkinSolution calibrate_lambda(const DriftField& b, const SpaceTimeGrid& grid, double target,
                                 const PdeOptions& opts) {
    if (!(target > 0.0 && target < 1.0)) throw DomainError("calibrate_lambda: target must lie in (0, 1)");
    std::vector<std::pair<double, double>> trace;
    for (int e = 0; e <= 20; ++e) {
        const double lambda = std::ldexp(1.0, e);
        PdeSolution pde = solve_backward_pde(b, b, lambda, grid, opts);
        ZvonkinSolution sol = build_zvonkin(std::move(pde.u), lambda);
        trace.emplace_back(lambda, sol.diagnostics.sup_grad_u);
        if (sol.diagnostics.sup_grad_u <= target) {
            sol.trace = std::move(trace);
            sol.warnings = std::move(pde.warnings);
            return sol;
        }
    }
    throw CalibrationError("calibrate_lambda: sup ||grad U|| stayed above " + format_double(target) +
                               " up to lambda = 2^20 for drift '" + b.label + "'",
                           std::move(trace));
}

Vec ZvonkinSolution::value(double t, const Vec& x) const {
    double buf[kMaxDim];
    U.interpolate(t, x, std::span<double>(buf, static_cast<std::size_t>(dim())));
    Vec v(dim());
    for (int i = 0; i < dim(); ++i) v(i) = buf[i];
    return v;
}

Mat ZvonkinSolution::gradient(double t, const Vec& x) const {
    const int d = dim();
    double buf[kMaxDim * kMaxDim];
    gradU.interpolate(t, x, std::span<double>(buf, static_cast<std::size_t>(d * d)));
    Mat m(d, d);
    for (int i = 0; i < d; ++i) {
        for (int j = 0; j < d; ++j) m(i, j) = buf[i * d + j];
    }
    return m;
}

void ZvonkinSolution::hessian(double t, const Vec& x, std::span<double> out) const {
    hessU.interpolate(t, x, out);
}

Vec gamma_forward(const ZvonkinSolution& sol, double t, const Vec& x) { return x + sol.value(t, x); }

Vec gamma_inverse(const ZvonkinSolution& sol, double t, const Vec& y, const InverseOptions& opts) {
    return gamma_inverse(sol, t, y, y, opts);
}

Vec gamma_inverse(const ZvonkinSolution& sol, double t, const Vec& y, const Vec& start, const InverseOptions& opts) {
    Vec x = start;
    double residual = 0.0;
    for (int it = 0; it <= opts.max_iterations; ++it) {
        const Vec u = sol.value(t, x);
        residual = (x + u - y).norm();
        if (residual <= opts.tolerance) return x;
        x = y - u;
    }
    throw InversionError("gamma_inverse: no convergence in " + std::to_string(opts.max_iterations) +
                             " iterations at t=" + format_double(t) + ", residual " + format_double(residual),
                         residual);
}

Mat gamma_inverse_jacobian(const ZvonkinSolution& sol, double t, const Vec& y, double h) {
    const int d = sol.dim();
    Mat J(d, d);
    InverseOptions tight;
    tight.tolerance = 1e-13;
    tight.max_iterations = 400;
    for (int j = 0; j < d; ++j) {
        Vec yp = y, ym = y;
        yp(j) += h;
        ym(j) -= h;
        const Vec col = (gamma_inverse(sol, t, yp, tight) - gamma_inverse(sol, t, ym, tight)) / (2.0 * h);
        J.col(j) = col;
    }
    return J;
}

namespace {

double grad_diff_norm(const ZvonkinSolution& sol, std::size_t k1, std::size_t n1, std::size_t k2, std::size_t n2) {
    const int w = sol.gradU.width;
    double s = 0.0;
    for (int c = 0; c < w; ++c) {
        const double e = sol.gradU.at(k1, n1, c) - sol.gradU.at(k2, n2, c);
        s += e * e;
    }
    return std::sqrt(s);
}

std::vector<std::size_t> dyadic_offsets(double extent, double step, std::size_t max_offset, int levels) {
    std::set<std::size_t> offs;
    for (int m = 1; m <= levels; ++m) {
        const auto o = static_cast<std::size_t>(std::llround(std::ldexp(extent, -m) / step));
        if (o >= 1 && o <= max_offset) offs.insert(o);
    }
    return {offs.begin(), offs.end()};
}

}  // namespace

HolderStats holder_diagnostics(const ZvonkinSolution& sol, double eps, const MixedNormParams& params) {
    params.validate();
    if (!(eps > 0.0 && eps < 1.0)) throw DomainError("holder_diagnostics: eps must lie in (0, 1)");
    if (!(eps + params.d / params.p + 2.0 / params.q < 1.0)) {
        throw DomainError("holder_diagnostics: eps + d/p + 2/q must be < 1");
    }
    const SpaceTimeGrid& g = sol.grid();
    HolderStats out;

    // Sampled spatial nodes and time levels.
    const std::size_t node_stride = std::max<std::size_t>(1, g.n_x / 64);
    std::vector<std::size_t> sample_nodes;
    for (std::size_t node = 0; node < g.nodes(); ++node) {
        std::size_t idx[2] = {0, 0};
        g.unflatten(node, idx);
        bool keep = true;
        for (int a = 0; a < g.d; ++a) keep = keep && idx[a] % node_stride == 0;
        if (keep) sample_nodes.push_back(node);
    }
    const std::size_t level_stride = std::max<std::size_t>(1, g.n_t / 32);

    for (std::size_t s : dyadic_offsets(g.T, g.dt(), g.n_t, 12)) {
        const double denom = std::pow(static_cast<double>(s) * g.dt(), 0.5 * eps);
        for (std::size_t k = 0; k + s <= g.n_t; k += level_stride) {
            for (std::size_t node : sample_nodes) {
                out.time_ratio_max = std::max(out.time_ratio_max, grad_diff_norm(sol, k + s, node, k, node) / denom);
                ++out.time_pairs;
            }
        }
    }

    const std::size_t base_stride = std::max<std::size_t>(1, g.n_x / 128);
    for (std::size_t s : dyadic_offsets(2.0 * g.L, g.dx(), g.n_x - 1, 16)) {
        const double denom = std::pow(static_cast<double>(s) * g.dx(), eps);
        for (std::size_t k = 0; k <= g.n_t; k += std::max<std::size_t>(1, g.n_t / 16)) {
            for (std::size_t node = 0; node < g.nodes(); ++node) {
                std::size_t idx[2] = {0, 0};
                g.unflatten(node, idx);
                bool keep = true;
                for (int a = 0; a < g.d; ++a) keep = keep && idx[a] % base_stride == 0;
                if (!keep) continue;
                for (int a = 0; a < g.d; ++a) {
                    if (idx[a] + s >= g.n_x) continue;
                    std::size_t other[2] = {idx[0], idx[1]};
                    other[a] += s;
                    out.space_ratio_max =
                        std::max(out.space_ratio_max, grad_diff_norm(sol, k, node, k, g.flatten(other)) / denom);
                    ++out.space_pairs;
                }
            }
        }
    }
    return out;
}

void write_solution_csv(const ZvonkinSolution& sol, const std::filesystem::path& path) {
    const SpaceTimeGrid& g = sol.grid();
    CsvTable table;
    table.header.push_back("t");
    for (int a = 1; a <= g.d; ++a) table.header.push_back("x" + std::to_string(a));
    for (int a = 1; a <= g.d; ++a) table.header.push_back("U" + std::to_string(a));
    table.rows.reserve(g.levels() * g.nodes());
    for (std::size_t k = 0; k <= g.n_t; ++k) {
        for (std::size_t node = 0; node < g.nodes(); ++node) {
            std::vector<CsvCell> row;
            row.emplace_back(g.time(k));
            const Vec x = g.point(node);
            for (int a = 0; a < g.d; ++a) row.emplace_back(x(a));
            for (int c = 0; c < g.d; ++c) row.emplace_back(sol.U.at(k, node, c));
            table.rows.push_back(std::move(row));
        }
    }
    emit_csv(table, path);
}

ZvonkinSolution read_solution_csv(const std::filesystem::path& path, double lambda) {
    const CsvText text = read_csv(path);
    if (text.header.size() != 3 && text.header.size() != 5) {
        throw IoError("solution csv " + path.string() + ": expected t,x1..xd,U1..Ud");
    }
    const int d = static_cast<int>((text.header.size() - 1) / 2);
    std::vector<double> times;
    std::vector<double> axis;
    for (const auto& r : text.rows) {
        const double t = parse_double(r.at(0));
        if (times.empty() || times.back() != t) times.push_back(t);
    }
    const std::size_t per_level = text.rows.size() / times.size();
    for (std::size_t i = 0; i < per_level; ++i) axis.push_back(parse_double(text.rows[i].at(static_cast<std::size_t>(d))));
    std::sort(axis.begin(), axis.end());
    axis.erase(std::unique(axis.begin(), axis.end()), axis.end());

    SpaceTimeGrid g;
    g.d = d;
    g.T = times.back();
    g.n_t = times.size() - 1;
    g.n_x = axis.size();
    g.L = axis.back();
    g.validate();
    if (g.nodes() != per_level || per_level * times.size() != text.rows.size()) {
        throw IoError("solution csv " + path.string() + ": rows do not form a space-time grid");
    }
    GridField U(g, d);
    for (std::size_t r = 0; r < text.rows.size(); ++r) {
        for (int c = 0; c < d; ++c) {
            U.values[r * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
                parse_double(text.rows[r].at(static_cast<std::size_t>(1 + d + c)));
        }
    }
    return build_zvonkin(std::move(U), lambda);
}

std::string diagnostics_report(const ZvonkinSolution& sol) {
    std::ostringstream os;
    os << "lambda=" << format_double(sol.lambda) << '\n'
       << "sup_grad_u=" << format_double(sol.diagnostics.sup_grad_u) << '\n'
       << "sup_grad_gamma_inv=" << format_double(sol.diagnostics.sup_grad_gamma_inv) << '\n'
       << "injective=" << (sol.diagnostics.injective ? "true" : "false") << '\n'
       << "trace_length=" << sol.trace.size() << '\n';
    for (std::size_t i = 0; i < sol.trace.size(); ++i) {
        os << "trace." << i << "=" << format_double(sol.trace[i].first) << ":" << format_double(sol.trace[i].second)
           << '\n';
    }
    for (std::size_t i = 0; i < sol.warnings.size(); ++i) os << "warning." << i << "=" << sol.warnings[i] << '\n';
    return os.str();
}

}  // namespace zvlab
