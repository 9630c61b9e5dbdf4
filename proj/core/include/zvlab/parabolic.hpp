#pragma once

#include "zvlab/drift.hpp"
#include "zvlab/grid.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace zvlab {

enum class TimeDirection { Backward, Forward };

/// Per-node data callback: fills out[0..width) at (t, x).
using NodeFn = std::function<void(double t, const Vec& x, std::span<double> out)>;

/// du/dtau = 1/2 Lap u + b . grad u - reaction u + source, marched in
/// tau = T - t (Backward, from level n_t) or tau = t (Forward, from level 0).
/// Diffusion and reaction are implicit; advection (first-order upwind) and the
/// source are explicit at the old time level. Dirichlet data on the box
/// boundary.
struct ParabolicSpec {
    const DriftField* advection = nullptr;
    double reaction = 0.0;
    int width = 1;
    TimeDirection direction = TimeDirection::Backward;
    NodeFn start;     ///< terminal (Backward) or initial (Forward) data; empty -> 0
    NodeFn source;    ///< empty -> 0
    NodeFn boundary;  ///< empty -> 0
    int substeps = 1; ///< inner steps per stored level
};

struct ParabolicResult {
    GridField field;
    std::vector<std::string> warnings;
    double max_cfl = 0.0;  ///< max over nodes of sum_a |b_a| dtau / dx
};

/// Throws NumericalError naming the first time level with a non-finite node.
ParabolicResult solve_parabolic(const SpaceTimeGrid& grid, const ParabolicSpec& spec);

}  // namespace zvlab
