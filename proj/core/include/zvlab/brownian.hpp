#pragma once

#include "zvlab/linalg.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace zvlab {

/// Default memory cap: 256 MiB. Applies to per-worker path buffers when an
/// ensemble is generated and to the full table when it is materialized.
inline constexpr std::size_t kDefaultMemoryBudget = std::size_t{256} << 20;

/// Descriptor of a Brownian ensemble. Increments are never stored: increment
/// (path i, step k) is a pure function of (seed, i, k), so any path can be
/// regenerated on its own and results do not depend on how paths are split
/// across workers.
class BrownianEnsemble {
public:
    BrownianEnsemble(std::size_t paths, std::size_t steps, double dt, int dim, std::uint64_t seed,
                     std::size_t memory_budget = kDefaultMemoryBudget);

    std::size_t paths() const noexcept { return paths_; }
    std::size_t steps() const noexcept { return steps_; }
    double dt() const noexcept { return dt_; }
    double horizon() const noexcept { return dt_ * static_cast<double>(steps_); }
    int dim() const noexcept { return dim_; }
    std::uint64_t seed() const noexcept { return seed_; }
    std::size_t memory_budget() const noexcept { return budget_; }

    /// Time of node k.
    double time(std::size_t k) const noexcept { return dt_ * static_cast<double>(k); }

    /// Node index of time t; throws DomainError if t is not on the grid.
    std::size_t node_of(double t) const;

    /// All increments of path i, laid out step-major (steps x dim), scaled by sqrt(dt).
    void path_increments(std::size_t path, std::span<double> out) const;

    Vec increment(std::size_t path, std::size_t step) const;

    /// Same geometry, statistically independent stream.
    BrownianEnsemble independent(std::uint64_t stream) const;

    /// Same geometry and seed, different path count.
    BrownianEnsemble with_paths(std::size_t paths) const;

    /// Same seed with a different time step count / size.
    BrownianEnsemble with_steps(std::size_t steps, double dt) const;

    /// Full increment table (paths x steps x dim); enforces the memory budget.
    std::vector<double> materialize() const;

private:
    std::size_t paths_;
    std::size_t steps_;
    double dt_;
    int dim_;
    std::uint64_t seed_;
    std::size_t budget_;
};

BrownianEnsemble generate_brownian(std::size_t paths, std::size_t steps, double dt, int dim,
                                   std::uint64_t seed,
                                   std::size_t memory_budget = kDefaultMemoryBudget);

}  // namespace zvlab
