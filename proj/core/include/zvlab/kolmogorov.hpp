#pragma once

#include "zvlab/brownian.hpp"
#include "zvlab/csv.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/grid.hpp"
#include "zvlab/sensitivity.hpp"
#include "zvlab/stats.hpp"
#include "zvlab/zvonkin.hpp"

#include <span>
#include <string>
#include <vector>

namespace zvlab {

/// Grid solution of d_t v = b . grad v + 1/2 Lap v, v(0, .) = phi, marched
/// forward in t with v = phi frozen on the box boundary.
struct KolmogorovSolution {
    GridField v;       ///< width 1
    GridField grad_v;  ///< width d, central differences (one-sided at the edges)
    DriftField b;
    Payoff phi;
    std::vector<std::string> warnings;
    double max_cfl = 0.0;

    const SpaceTimeGrid& grid() const noexcept { return v.grid; }
    double value(double t, const Vec& x) const;
    Vec gradient(double t, const Vec& x) const;
};

KolmogorovSolution solve_kolmogorov(const DriftField& b, const Payoff& phi, const SpaceTimeGrid& grid,
                                    const PdeOptions& opts = {});

/// Restarts from v(T, .) of sol and marches a further horizon over n_t steps
/// with the drift shifted in time by sol's horizon.
KolmogorovSolution continue_kolmogorov(const KolmogorovSolution& sol, double horizon, std::size_t n_t,
                                       const PdeOptions& opts = {});

struct Probe {
    double t = 0.0;
    Vec x;
};

/// count equispaced points on [-L/2, L/2] along the first axis, at each of
/// the time fractions of T.
std::vector<Probe> probe_ladder(const SpaceTimeGrid& grid, std::size_t count = 11,
                                std::span<const double> time_fractions = {});

struct ProbeRow {
    Probe probe;
    int axis = 0;
    double grid_value = 0.0;
    double reference = 0.0;
    double stderr_ = 0.0;
    double difference = 0.0;  ///< |grid_value - reference|
    double tolerance = 0.0;   ///< 3 stderr + slack
    bool pass = false;
};

struct ComparisonRecord {
    std::string name;
    std::vector<ProbeRow> rows;
    double worst_difference = 0.0;
    double worst_excess = 0.0;  ///< max of difference - tolerance
    bool passed = true;
};

/// v on the grid against Monte Carlo means of phi(X_t^x) from Euler-Maruyama
/// paths of b; tolerance 3 stderr + slack per probe.
ComparisonRecord compare_mc(const KolmogorovSolution& sol, std::span<const Probe> probes, const BrownianEnsemble& ens,
                            double slack);

/// grad_v at each probe against the matching gradient estimate (one per probe).
ComparisonRecord gradient_field_check(const KolmogorovSolution& sol, std::span<const Probe> probes,
                                      std::span<const EstimatorResult> estimates, double slack);

/// Rows t,x1..xd,v,gradv1..gradvd.
CsvTable kolmogorov_table(const KolmogorovSolution& sol);

/// Rows t,x1..xd,axis,grid,reference,stderr,difference,tolerance,pass.
CsvTable comparison_table(const ComparisonRecord& rec);

/// key=value summary with the worst row.
std::string comparison_report(const ComparisonRecord& rec);

}  // namespace zvlab
