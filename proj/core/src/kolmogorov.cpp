#include "zvlab/kolmogorov.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parabolic.hpp"
#include "zvlab/parallel.hpp"
#include "zvlab/sde.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <sstream>

namespace zvlab {

namespace {

GridField central_gradient(const GridField& v) {
    const SpaceTimeGrid& g = v.grid;
    GridField out(g, g.d);
    const std::size_t n = g.nodes();
    const double h = g.dx();
    for (std::size_t k = 0; k < g.levels(); ++k) {
        for (std::size_t node = 0; node < n; ++node) {
            std::size_t idx[2] = {0, 0};
            g.unflatten(node, idx);
            for (int a = 0; a < g.d; ++a) {
                std::size_t lo[2] = {idx[0], idx[1]}, hi[2] = {idx[0], idx[1]};
                double span = 2.0 * h;
                if (idx[a] == 0) {
                    hi[a] += 1;
                    span = h;
                } else if (idx[a] + 1 == g.n_x) {
                    lo[a] -= 1;
                    span = h;
                } else {
                    lo[a] -= 1;
                    hi[a] += 1;
                }
                out.at(k, node, a) = (v.at(k, g.flatten(hi), 0) - v.at(k, g.flatten(lo), 0)) / span;
            }
        }
    }
    return out;
}

KolmogorovSolution march(const DriftField& b, const Payoff& phi, const SpaceTimeGrid& grid, const PdeOptions& opts,
                         NodeFn start) {
    if (grid.d > 2) throw DomainError("solve_kolmogorov: d must be 1 or 2");
    if (b.dim != grid.d) throw DomainError("solve_kolmogorov: drift dimension does not match the grid");
    ParabolicSpec spec;
    spec.advection = &b;
    spec.reaction = 0.0;
    spec.width = 1;
    spec.direction = TimeDirection::Forward;
    spec.substeps = opts.substeps;
    spec.start = std::move(start);
    spec.boundary = [&phi](double, const Vec& x, std::span<double> out) { out[0] = phi(x); };
    ParabolicResult r = solve_parabolic(grid, spec);
    KolmogorovSolution sol;
    sol.grad_v = central_gradient(r.field);
    sol.v = std::move(r.field);
    sol.b = b;
    sol.phi = phi;
    sol.warnings = std::move(r.warnings);
    sol.max_cfl = r.max_cfl;
    return sol;
}

}  // namespace

double KolmogorovSolution::value(double t, const Vec& x) const {
    double out = 0.0;
    v.interpolate(t, x, std::span<double>(&out, 1));
    return out;
}

Vec KolmogorovSolution::gradient(double t, const Vec& x) const {
    Vec g(grid().d);
    grad_v.interpolate(t, x, std::span<double>(g.data(), static_cast<std::size_t>(g.size())));
    return g;
}

KolmogorovSolution solve_kolmogorov(const DriftField& b, const Payoff& phi, const SpaceTimeGrid& grid,
                                    const PdeOptions& opts) {
    return march(b, phi, grid, opts, [&phi](double, const Vec& x, std::span<double> out) { out[0] = phi(x); });
}

KolmogorovSolution continue_kolmogorov(const KolmogorovSolution& sol, double horizon, std::size_t n_t,
                                       const PdeOptions& opts) {
    SpaceTimeGrid grid = sol.grid();
    const double shift = grid.T;
    grid.T = horizon;
    grid.n_t = n_t;
    DriftField shifted = sol.b;
    if (!sol.b.autonomous) {
        const DriftFn f = sol.b.eval;
        shifted.eval = [f, shift](double t, const Vec& x) { return f(t + shift, x); };
        if (sol.b.grad) {
            const DriftGradFn g = sol.b.grad;
            shifted.grad = [g, shift](double t, const Vec& x) { return g(t + shift, x); };
        }
    }
    const std::size_t last = sol.grid().n_t;
    const GridField& v = sol.v;
    return march(shifted, sol.phi, grid, opts, [&v, last](double, const Vec& x, std::span<double> out) {
        v.interpolate(v.grid.time(last), x, out);
    });
}

std::vector<Probe> probe_ladder(const SpaceTimeGrid& grid, std::size_t count, std::span<const double> time_fractions) {
    static const double defaults[] = {0.25, 0.5, 1.0};
    if (time_fractions.empty()) time_fractions = defaults;
    if (count < 2) throw DomainError("probe_ladder: need at least two points");
    std::vector<Probe> out;
    const double half = 0.5 * grid.L;
    for (double f : time_fractions) {
        for (std::size_t i = 0; i < count; ++i) {
            Probe p;
            p.t = f * grid.T;
            p.x = Vec::Zero(grid.d);
            p.x(0) = -half + 2.0 * half * static_cast<double>(i) / static_cast<double>(count - 1);
            out.push_back(p);
        }
    }
    return out;
}

namespace {

void finish(ComparisonRecord& rec) {
    rec.passed = true;
    rec.worst_difference = 0.0;
    rec.worst_excess = -std::numeric_limits<double>::infinity();
    for (const auto& r : rec.rows) {
        rec.passed = rec.passed && r.pass;
        rec.worst_difference = std::max(rec.worst_difference, r.difference);
        rec.worst_excess = std::max(rec.worst_excess, r.difference - r.tolerance);
    }
    if (rec.rows.empty()) rec.worst_excess = 0.0;
}

}  // namespace

ComparisonRecord compare_mc(const KolmogorovSolution& sol, std::span<const Probe> probes, const BrownianEnsemble& ens,
                            double slack) {
    const SpaceTimeGrid& g = sol.grid();
    // Group probes sharing a start point so each start needs one pass.
    std::map<std::vector<double>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const Probe& p = probes[i];
        for (int a = 0; a < g.d; ++a) {
            if (std::abs(p.x(a)) > g.L) throw DomainError("compare_mc: probe outside the grid box");
        }
        groups[std::vector<double>(p.x.data(), p.x.data() + p.x.size())].push_back(i);
    }
    std::vector<ProbeRow> rows(probes.size());
    for (const auto& [key, members] : groups) {
        std::vector<std::size_t> nodes;
        for (std::size_t i : members) nodes.push_back(ens.node_of(probes[i].t));
        const Vec x0 = probes[members.front()].x;
        const NodeSamples s = em_samples(sol.b, x0, ens, nodes);
        std::vector<double> per_path(s.paths * nodes.size());
        parallel_for(s.paths, [&](std::size_t begin, std::size_t end) {
            Vec x(g.d);
            for (std::size_t i = begin; i < end; ++i) {
                for (std::size_t j = 0; j < nodes.size(); ++j) {
                    for (int c = 0; c < g.d; ++c) x(c) = s.at(i, j, c);
                    per_path[i * nodes.size() + j] = sol.phi(x);
                }
            }
        });
        const EstimatorResult est = summarize(per_path, nodes.size(), s.valid);
        for (std::size_t j = 0; j < members.size(); ++j) {
            ProbeRow& r = rows[members[j]];
            r.probe = probes[members[j]];
            r.grid_value = sol.value(r.probe.t, r.probe.x);
            r.reference = est.mean[j];
            r.stderr_ = est.stderr_[j];
            r.difference = std::abs(r.grid_value - r.reference);
            r.tolerance = 3.0 * r.stderr_ + slack;
            r.pass = r.difference <= r.tolerance;
        }
    }
    ComparisonRecord rec;
    rec.name = "compare-mc";
    rec.rows = std::move(rows);
    finish(rec);
    return rec;
}

ComparisonRecord gradient_field_check(const KolmogorovSolution& sol, std::span<const Probe> probes,
                                      std::span<const EstimatorResult> estimates, double slack) {
    if (probes.size() != estimates.size()) {
        throw DomainError("gradient_field_check: one estimate per probe is required");
    }
    ComparisonRecord rec;
    rec.name = "gradient-field";
    for (std::size_t i = 0; i < probes.size(); ++i) {
        const Vec g = sol.gradient(probes[i].t, probes[i].x);
        if (estimates[i].mean.size() != static_cast<std::size_t>(g.size())) {
            throw DomainError("gradient_field_check: estimate width does not match the dimension");
        }
        for (int a = 0; a < g.size(); ++a) {
            ProbeRow r;
            r.probe = probes[i];
            r.axis = a;
            r.grid_value = g(a);
            r.reference = estimates[i].mean[static_cast<std::size_t>(a)];
            r.stderr_ = estimates[i].stderr_[static_cast<std::size_t>(a)];
            r.difference = std::abs(r.grid_value - r.reference);
            r.tolerance = 3.0 * r.stderr_ + slack;
            r.pass = r.difference <= r.tolerance;
            rec.rows.push_back(r);
        }
    }
    finish(rec);
    return rec;
}

CsvTable kolmogorov_table(const KolmogorovSolution& sol) {
    const SpaceTimeGrid& g = sol.grid();
    CsvTable t;
    t.header = {"t"};
    for (int a = 0; a < g.d; ++a) t.header.push_back("x" + std::to_string(a + 1));
    t.header.push_back("v");
    for (int a = 0; a < g.d; ++a) t.header.push_back("gradv" + std::to_string(a + 1));
    for (std::size_t k = 0; k < g.levels(); ++k) {
        for (std::size_t node = 0; node < g.nodes(); ++node) {
            std::vector<CsvCell> row{g.time(k)};
            const Vec x = g.point(node);
            for (int a = 0; a < g.d; ++a) row.emplace_back(x(a));
            row.emplace_back(sol.v.at(k, node, 0));
            for (int a = 0; a < g.d; ++a) row.emplace_back(sol.grad_v.at(k, node, a));
            t.add_row(std::move(row));
        }
    }
    return t;
}

CsvTable comparison_table(const ComparisonRecord& rec) {
    CsvTable t;
    const int d = rec.rows.empty() ? 1 : static_cast<int>(rec.rows.front().probe.x.size());
    t.header = {"t"};
    for (int a = 0; a < d; ++a) t.header.push_back("x" + std::to_string(a + 1));
    for (const char* h : {"axis", "grid", "reference", "stderr", "difference", "tolerance", "pass"}) t.header.push_back(h);
    for (const auto& r : rec.rows) {
        std::vector<CsvCell> row{r.probe.t};
        for (int a = 0; a < d; ++a) row.emplace_back(r.probe.x(a));
        row.emplace_back(static_cast<std::int64_t>(r.axis));
        row.emplace_back(r.grid_value);
        row.emplace_back(r.reference);
        row.emplace_back(r.stderr_);
        row.emplace_back(r.difference);
        row.emplace_back(r.tolerance);
        row.emplace_back(static_cast<std::int64_t>(r.pass ? 1 : 0));
        t.add_row(std::move(row));
    }
    return t;
}

std::string comparison_report(const ComparisonRecord& rec) {
    std::ostringstream os;
    os << "name=" << rec.name << '\n';
    os << "probes=" << rec.rows.size() << '\n';
    os << "passed=" << (rec.passed ? "true" : "false") << '\n';
    os << "worst_difference=" << format_double(rec.worst_difference) << '\n';
    os << "worst_excess=" << format_double(rec.worst_excess) << '\n';
    auto it = std::max_element(rec.rows.begin(), rec.rows.end(), [](const ProbeRow& a, const ProbeRow& b) {
        return a.difference - a.tolerance < b.difference - b.tolerance;
    });
    if (it != rec.rows.end()) {
        os << "worst_t=" << format_double(it->probe.t) << '\n';
        os << "worst_x=" << format_double(it->probe.x(0)) << '\n';
        os << "worst_grid=" << format_double(it->grid_value) << '\n';
        os << "worst_reference=" << format_double(it->reference) << '\n';
    }
    return os.str();
}

}  // namespace zvlab
