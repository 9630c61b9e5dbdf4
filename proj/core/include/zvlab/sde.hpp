#pragma once

#include "zvlab/brownian.hpp"
#include "zvlab/csv.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/stats.hpp"
#include "zvlab/zvonkin.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace zvlab {

/// Materialized states of an ensemble at every time node.
struct PathEnsemble {
    std::size_t paths = 0;
    std::size_t levels = 0;  ///< steps + 1
    int dim = 1;
    double dt = 0.0;
    Vec x0;
    std::string drift_label;
    std::vector<double> states;           ///< (path, level, dim)
    std::vector<double> log_weight;       ///< per path; zero unless a weight was attached
    std::vector<unsigned char> valid;     ///< 0 marks a path excluded (domain exit, overflow)

    double state(std::size_t path, std::size_t level, int c = 0) const {
        return states[(path * levels + level) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)];
    }
    Vec state_vec(std::size_t path, std::size_t level) const;
    std::size_t excluded() const;
    /// Component c at the given level over valid paths.
    std::vector<double> slice(std::size_t level, int c = 0) const;
};

/// States of an ensemble at selected nodes only; the streaming counterpart of
/// PathEnsemble for large path counts.
struct NodeSamples {
    std::vector<std::size_t> nodes;
    int dim = 1;
    std::size_t paths = 0;
    std::vector<double> values;        ///< (path, node index, dim)
    std::vector<unsigned char> valid;

    double at(std::size_t path, std::size_t j, int c = 0) const {
        return values[(path * nodes.size() + j) * static_cast<std::size_t>(dim) + static_cast<std::size_t>(c)];
    }
    std::size_t excluded() const;
    std::vector<double> slice(std::size_t j, int c = 0) const;
};

/// Euler-Maruyama X_{k+1} = X_k + b(t_k, X_k) dt + dB_k. Throws
/// EvaluationError naming (path, step) on a non-finite state; SizingError if
/// the full table exceeds the ensemble's memory budget.
PathEnsemble simulate_em(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens);

NodeSamples em_samples(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens,
                       std::span<const std::size_t> nodes);

/// Integrates dY = lambda U(t, X) dt + (I + grad U(t, X)) dB with
/// X = gamma^{-1}(t, Y), Y_0 = x0 + U(0, x0), and records the recovered X.
/// Paths leaving the grid box are marked invalid. Requires the ensemble
/// horizon to match the solution grid.
PathEnsemble simulate_transformed(const ZvonkinSolution& sol, const Vec& x0, const BrownianEnsemble& ens);

NodeSamples transformed_samples(const ZvonkinSolution& sol, const Vec& x0, const BrownianEnsemble& ens,
                                std::span<const std::size_t> nodes);

/// Rows path,t,x1..xd,log_weight for every valid path and node.
CsvTable paths_table(const PathEnsemble& paths);

/// Rows name,mean1..,stderr1..,M,seed,fingerprint (width from the first result).
CsvTable estimator_table(std::span<const EstimatorResult> results);

}  // namespace zvlab
