#include "zvlab/sde.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"

#include <algorithm>
#include <cmath>

namespace zvlab {

Vec PathEnsemble::state_vec(std::size_t path, std::size_t level) const {
    Vec v(dim);
    for (int c = 0; c < dim; ++c) v(c) = state(path, level, c);
    return v;
}

std::size_t PathEnsemble::excluded() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 0));
}

std::vector<double> PathEnsemble::slice(std::size_t level, int c) const {
    std::vector<double> out;
    out.reserve(paths);
    for (std::size_t i = 0; i < paths; ++i) {
        if (valid[i]) out.push_back(state(i, level, c));
    }
    return out;
}

std::size_t NodeSamples::excluded() const {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), 0));
}

std::vector<double> NodeSamples::slice(std::size_t j, int c) const {
    std::vector<double> out;
    out.reserve(paths);
    for (std::size_t i = 0; i < paths; ++i) {
        if (valid[i]) out.push_back(at(i, j, c));
    }
    return out;
}

namespace {

void check_dims(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens, const char* who) {
    if (b.dim != ens.dim() || x0.size() != b.dim) {
        throw DomainError(std::string(who) + ": drift, start point and ensemble dimensions differ");
    }
}

void check_budget(const BrownianEnsemble& ens, std::size_t levels, int dim) {
    const std::size_t per_path = levels * static_cast<std::size_t>(dim);
    if (ens.paths() > ens.memory_budget() / sizeof(double) / per_path) {
        throw SizingError("path table of " + std::to_string(ens.paths()) + " x " + std::to_string(levels) +
                          " states exceeds the memory budget; use a streaming estimator");
    }
}

// Calls record(level, X) at every node of one Euler-Maruyama path.
template <typename Record>
void em_path(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens, std::size_t path,
             std::vector<double>& inc, Record&& record) {
    const int d = ens.dim();
    const double dt = ens.dt();
    ens.path_increments(path, inc);
    Vec x = x0;
    record(std::size_t{0}, x);
    for (std::size_t k = 0; k < ens.steps(); ++k) {
        const Vec v = b.eval(ens.time(k), x);
        for (int c = 0; c < d; ++c) x(c) += v(c) * dt + inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
        for (int c = 0; c < d; ++c) {
            if (!std::isfinite(x(c))) {
                throw EvaluationError("simulate_em: non-finite state on path " + std::to_string(path) + " at step " +
                                      std::to_string(k));
            }
        }
        record(k + 1, x);
    }
}

}  // namespace

PathEnsemble simulate_em(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens) {
    check_dims(b, x0, ens, "simulate_em");
    const std::size_t levels = ens.steps() + 1;
    check_budget(ens, levels, ens.dim());
    PathEnsemble out;
    out.paths = ens.paths();
    out.levels = levels;
    out.dim = ens.dim();
    out.dt = ens.dt();
    out.x0 = x0;
    out.drift_label = b.label;
    out.states.resize(out.paths * levels * static_cast<std::size_t>(out.dim));
    out.log_weight.assign(out.paths, 0.0);
    out.valid.assign(out.paths, 1);
    const auto d = static_cast<std::size_t>(out.dim);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * d);
        for (std::size_t i = begin; i < end; ++i) {
            double* row = out.states.data() + i * levels * d;
            em_path(b, x0, ens, i, inc, [&](std::size_t k, const Vec& x) {
                for (std::size_t c = 0; c < d; ++c) row[k * d + c] = x(static_cast<Eigen::Index>(c));
            });
        }
    });
    return out;
}

NodeSamples em_samples(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens,
                       std::span<const std::size_t> nodes) {
    check_dims(b, x0, ens, "em_samples");
    NodeSamples out;
    out.nodes.assign(nodes.begin(), nodes.end());
    for (std::size_t n : out.nodes) {
        if (n > ens.steps()) throw DomainError("em_samples: node beyond the ensemble horizon");
    }
    out.dim = ens.dim();
    out.paths = ens.paths();
    const auto d = static_cast<std::size_t>(out.dim);
    const std::size_t width = out.nodes.size() * d;
    out.values.resize(out.paths * width);
    out.valid.assign(out.paths, 1);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * d);
        for (std::size_t i = begin; i < end; ++i) {
            double* row = out.values.data() + i * width;
            em_path(b, x0, ens, i, inc, [&](std::size_t k, const Vec& x) {
                for (std::size_t j = 0; j < out.nodes.size(); ++j) {
                    if (out.nodes[j] != k) continue;
                    for (std::size_t c = 0; c < d; ++c) row[j * d + c] = x(static_cast<Eigen::Index>(c));
                }
            });
        }
    });
    return out;
}

namespace {

// One transformed path; record(level, X) per node. Returns false if the path
// left the grid box.
template <typename Record>
bool transformed_path(const ZvonkinSolution& sol, const Vec& x0, const BrownianEnsemble& ens, std::size_t path,
                      std::vector<double>& inc, Record&& record) {
    const int d = ens.dim();
    const double dt = ens.dt();
    ens.path_increments(path, inc);
    Vec x = x0;
    Vec y = gamma_forward(sol, 0.0, x0);
    record(std::size_t{0}, x);
    Vec db(d);
    try {
        for (std::size_t k = 0; k < ens.steps(); ++k) {
            const double t = ens.time(k);
            const Vec u = sol.value(t, x);
            const Mat g = sol.gradient(t, x);
            for (int c = 0; c < d; ++c) db(c) = inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
            y += sol.lambda * u * dt + db + g * db;
            x = gamma_inverse(sol, ens.time(k + 1), y, x);
            record(k + 1, x);
        }
    } catch (const ExtrapolationError&) {
        return false;
    } catch (const InversionError& e) {
        throw InversionError("simulate_transformed: path " + std::to_string(path) + ": " + e.what(), e.residual());
    }
    return true;
}

void check_transform(const ZvonkinSolution& sol, const Vec& x0, const BrownianEnsemble& ens) {
    if (sol.dim() != ens.dim() || x0.size() != sol.dim()) {
        throw DomainError("simulate_transformed: dimension mismatch");
    }
    if (ens.horizon() > sol.grid().T * (1.0 + 1e-12)) {
        throw DomainError("simulate_transformed: ensemble horizon exceeds the solution grid horizon");
    }
}

}  // namespace

PathEnsemble simulate_transformed(const ZvonkinSolution& sol, const Vec& x0, const BrownianEnsemble& ens) {
    check_transform(sol, x0, ens);
    const std::size_t levels = ens.steps() + 1;
    check_budget(ens, levels, ens.dim());
    PathEnsemble out;
    out.paths = ens.paths();
    out.levels = levels;
    out.dim = ens.dim();
    out.dt = ens.dt();
    out.x0 = x0;
    out.drift_label = "zvonkin(lambda=" + format_double(sol.lambda) + ")";
    const auto d = static_cast<std::size_t>(out.dim);
    out.states.assign(out.paths * levels * d, 0.0);
    out.log_weight.assign(out.paths, 0.0);
    out.valid.assign(out.paths, 1);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * d);
        for (std::size_t i = begin; i < end; ++i) {
            double* row = out.states.data() + i * levels * d;
            const bool ok = transformed_path(sol, x0, ens, i, inc, [&](std::size_t k, const Vec& x) {
                for (std::size_t c = 0; c < d; ++c) row[k * d + c] = x(static_cast<Eigen::Index>(c));
            });
            out.valid[i] = ok ? 1 : 0;
        }
    });
    return out;
}

NodeSamples transformed_samples(const ZvonkinSolution& sol, const Vec& x0, const BrownianEnsemble& ens,
                                std::span<const std::size_t> nodes) {
    check_transform(sol, x0, ens);
    NodeSamples out;
    out.nodes.assign(nodes.begin(), nodes.end());
    out.dim = ens.dim();
    out.paths = ens.paths();
    const auto d = static_cast<std::size_t>(out.dim);
    const std::size_t width = out.nodes.size() * d;
    out.values.assign(out.paths * width, 0.0);
    out.valid.assign(out.paths, 1);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * d);
        for (std::size_t i = begin; i < end; ++i) {
            double* row = out.values.data() + i * width;
            const bool ok = transformed_path(sol, x0, ens, i, inc, [&](std::size_t k, const Vec& x) {
                for (std::size_t j = 0; j < out.nodes.size(); ++j) {
                    if (out.nodes[j] != k) continue;
                    for (std::size_t c = 0; c < d; ++c) row[j * d + c] = x(static_cast<Eigen::Index>(c));
                }
            });
            out.valid[i] = ok ? 1 : 0;
        }
    });
    return out;
}

CsvTable paths_table(const PathEnsemble& paths) {
    CsvTable t;
    t.header = {"path", "t"};
    for (int c = 1; c <= paths.dim; ++c) t.header.push_back("x" + std::to_string(c));
    t.header.push_back("log_weight");
    for (std::size_t i = 0; i < paths.paths; ++i) {
        if (!paths.valid[i]) continue;
        for (std::size_t k = 0; k < paths.levels; ++k) {
            std::vector<CsvCell> row;
            row.emplace_back(static_cast<std::int64_t>(i));
            row.emplace_back(paths.dt * static_cast<double>(k));
            for (int c = 0; c < paths.dim; ++c) row.emplace_back(paths.state(i, k, c));
            row.emplace_back(paths.log_weight[i]);
            t.rows.push_back(std::move(row));
        }
    }
    return t;
}

CsvTable estimator_table(std::span<const EstimatorResult> results) {
    CsvTable t;
    const std::size_t width = results.empty() ? 1 : results.front().mean.size();
    t.header.push_back("name");
    for (std::size_t c = 1; c <= width; ++c) t.header.push_back("mean" + std::to_string(c));
    for (std::size_t c = 1; c <= width; ++c) t.header.push_back("stderr" + std::to_string(c));
    t.header.insert(t.header.end(), {"M", "seed", "fingerprint"});
    for (const auto& r : results) {
        if (r.mean.size() != width) throw DomainError("estimator_table: results of differing width");
        std::vector<CsvCell> row;
        row.emplace_back(r.name);
        for (double m : r.mean) row.emplace_back(m);
        for (double s : r.stderr_) row.emplace_back(s);
        row.emplace_back(static_cast<std::int64_t>(r.samples));
        row.emplace_back(std::to_string(r.seed));
        row.emplace_back(r.fingerprint);
        t.rows.push_back(std::move(row));
    }
    return t;
}

}  // namespace zvlab
