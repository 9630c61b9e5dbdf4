#include "zvlab/brownian.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"
#include "zvlab/rng.hpp"

#include <cmath>
#include <string>

namespace zvlab {

BrownianEnsemble::BrownianEnsemble(std::size_t paths, std::size_t steps, double dt, int dim,
                                   std::uint64_t seed, std::size_t memory_budget)
    : paths_(paths), steps_(steps), dt_(dt), dim_(dim), seed_(seed), budget_(memory_budget) {
    if (paths == 0 || steps == 0) throw DomainError("BrownianEnsemble: paths and steps must be positive");
    if (!(dt > 0.0) || !std::isfinite(dt)) throw DomainError("BrownianEnsemble: dt must be positive");
    if (dim < 1 || dim > kMaxDim) {
        throw DomainError("BrownianEnsemble: dim must lie in [1, " + std::to_string(kMaxDim) + "]");
    }
}

std::size_t BrownianEnsemble::node_of(double t) const {
    const double k = t / dt_;
    const double r = std::round(k);
    if (r < 0.0 || r > static_cast<double>(steps_) || std::abs(k - r) > 1e-9 * std::max(1.0, r)) {
        throw DomainError("time " + std::to_string(t) + " is not a node of the ensemble grid");
    }
    return static_cast<std::size_t>(r);
}

void BrownianEnsemble::path_increments(std::size_t path, std::span<double> out) const {
    const std::size_t n = steps_ * static_cast<std::size_t>(dim_);
    if (out.size() != n) throw DomainError("path_increments: buffer must hold steps*dim values");
    fill_normals(seed_, path, 0, out);
    const double scale = std::sqrt(dt_);
    for (double& v : out) v *= scale;
}

Vec BrownianEnsemble::increment(std::size_t path, std::size_t step) const {
    Vec out(dim_);
    double buf[kMaxDim];
    fill_normals(seed_, path, static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(dim_),
                 std::span<double>(buf, static_cast<std::size_t>(dim_)));
    const double scale = std::sqrt(dt_);
    for (int c = 0; c < dim_; ++c) out(c) = buf[c] * scale;
    return out;
}

BrownianEnsemble BrownianEnsemble::independent(std::uint64_t stream) const {
    return BrownianEnsemble(paths_, steps_, dt_, dim_, mix_seed(seed_, stream), budget_);
}

BrownianEnsemble BrownianEnsemble::with_paths(std::size_t paths) const {
    return BrownianEnsemble(paths, steps_, dt_, dim_, seed_, budget_);
}

BrownianEnsemble BrownianEnsemble::with_steps(std::size_t steps, double dt) const {
    return BrownianEnsemble(paths_, steps, dt, dim_, seed_, budget_);
}

std::vector<double> BrownianEnsemble::materialize() const {
    const std::size_t per_path = steps_ * static_cast<std::size_t>(dim_);
    if (per_path != 0 && paths_ > budget_ / sizeof(double) / per_path) {
        throw SizingError("ensemble of " + std::to_string(paths_) + " x " + std::to_string(steps_) + " x " +
                          std::to_string(dim_) + " doubles exceeds the memory budget of " +
                          std::to_string(budget_) + " bytes");
    }
    std::vector<double> out(paths_ * per_path);
    parallel_for(paths_, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            path_increments(i, std::span<double>(out.data() + i * per_path, per_path));
        }
    });
    return out;
}

BrownianEnsemble generate_brownian(std::size_t paths, std::size_t steps, double dt, int dim,
                                   std::uint64_t seed, std::size_t memory_budget) {
    BrownianEnsemble ens(paths, steps, dt, dim, seed, memory_budget);
    // Streaming kernels hold one path of increments per worker.
    const std::size_t per_path = steps * static_cast<std::size_t>(dim) * sizeof(double);
    const auto workers = static_cast<std::size_t>(worker_count());
    if (per_path > memory_budget / workers) {
        throw SizingError("per-worker path buffers of " + std::to_string(per_path) +
                          " bytes exceed the memory budget of " + std::to_string(memory_budget) + " bytes");
    }
    return ens;
}

}  // namespace zvlab
