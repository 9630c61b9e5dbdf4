#include "zvlab/girsanov.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"

#include <cmath>

namespace zvlab {

namespace {

void check_dims(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens, const char* who) {
    if (b.dim != ens.dim() || x0.size() != b.dim) {
        throw DomainError(std::string(who) + ": drift, start point and ensemble dimensions differ");
    }
}

// Walks the driftless path x0 + B, calling visit(k, x_k, dB_k) for k < steps
// and at_node(k, x_k) at every node.
template <typename Visit, typename AtNode>
void driftless_path(const Vec& x0, const BrownianEnsemble& ens, std::size_t path, std::vector<double>& inc,
                    Visit&& visit, AtNode&& at_node) {
    const int d = ens.dim();
    ens.path_increments(path, inc);
    Vec x = x0;
    Vec db(d);
    at_node(std::size_t{0}, x);
    for (std::size_t k = 0; k < ens.steps(); ++k) {
        for (int c = 0; c < d; ++c) db(c) = inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
        visit(k, x, db);
        x += db;
        at_node(k + 1, x);
    }
}

}  // namespace

WeightSet doleans_weight(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens) {
    check_dims(b, x0, ens, "doleans_weight");
    WeightSet out;
    const std::size_t M = ens.paths();
    out.log_weights.resize(M);
    out.weights.resize(M);
    out.valid.assign(M, 1);
    const double dt = ens.dt();
    parallel_for(M, [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * static_cast<std::size_t>(ens.dim()));
        for (std::size_t i = begin; i < end; ++i) {
            double stoch = 0.0, quad = 0.0;
            driftless_path(
                x0, ens, i, inc,
                [&](std::size_t k, const Vec& x, const Vec& db) {
                    const Vec v = b.checked(ens.time(k), x);
                    stoch += v.dot(db);
                    quad += v.squaredNorm() * dt;
                },
                [](std::size_t, const Vec&) {});
            const double lw = stoch - 0.5 * quad;
            out.log_weights[i] = lw;
            if (!(lw <= kMaxLogWeight)) {
                out.valid[i] = 0;
                out.weights[i] = 0.0;
            } else {
                out.weights[i] = std::exp(lw);
            }
        }
    });
    for (unsigned char v : out.valid) out.excluded += v ? 0 : 1;
    return out;
}

std::vector<EstimatorResult> girsanov_estimates(std::span<const ScalarFn> fs, const DriftField& b, const Vec& x0,
                                                double t, const BrownianEnsemble& ens) {
    check_dims(b, x0, ens, "girsanov_estimate");
    const std::size_t node = ens.node_of(t);
    const std::size_t M = ens.paths();
    const std::size_t width = fs.size();
    const double dt = ens.dt();
    std::vector<double> per_path(M * width);
    std::vector<unsigned char> valid(M, 1);
    parallel_for(M, [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * static_cast<std::size_t>(ens.dim()));
        std::vector<double> fx(width);
        for (std::size_t i = begin; i < end; ++i) {
            double stoch = 0.0, quad = 0.0;
            driftless_path(
                x0, ens, i, inc,
                [&](std::size_t k, const Vec& x, const Vec& db) {
                    const Vec v = b.checked(ens.time(k), x);
                    stoch += v.dot(db);
                    quad += v.squaredNorm() * dt;
                },
                [&](std::size_t k, const Vec& x) {
                    if (k != node) return;
                    for (std::size_t j = 0; j < width; ++j) fx[j] = fs[j](x);
                });
            const double lw = stoch - 0.5 * quad;
            if (!(lw <= kMaxLogWeight)) {
                valid[i] = 0;
                continue;
            }
            const double w = std::exp(lw);
            for (std::size_t j = 0; j < width; ++j) per_path[i * width + j] = fx[j] * w;
        }
    });
    std::vector<EstimatorResult> out;
    for (std::size_t j = 0; j < width; ++j) {
        std::vector<double> col(M);
        for (std::size_t i = 0; i < M; ++i) col[i] = per_path[i * width + j];
        EstimatorResult r = summarize(col, 1, valid);
        r.seed = ens.seed();
        out.push_back(std::move(r));
    }
    return out;
}

EstimatorResult girsanov_estimate(const ScalarFn& f, const DriftField& b, const Vec& x0, double t,
                                  const BrownianEnsemble& ens) {
    const ScalarFn fs[] = {f};
    return girsanov_estimates(fs, b, x0, t, ens).front();
}

std::vector<EstimatorResult> em_estimates(std::span<const ScalarFn> fs, const DriftField& b, const Vec& x0, double t,
                                          const BrownianEnsemble& ens) {
    check_dims(b, x0, ens, "em_estimate");
    const std::size_t node = ens.node_of(t);
    const std::size_t M = ens.paths();
    const std::size_t width = fs.size();
    const int d = ens.dim();
    const double dt = ens.dt();
    std::vector<double> per_path(M * width);
    parallel_for(M, [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * static_cast<std::size_t>(d));
        for (std::size_t i = begin; i < end; ++i) {
            ens.path_increments(i, inc);
            Vec x = x0;
            for (std::size_t k = 0; k < node; ++k) {
                const Vec v = b.eval(ens.time(k), x);
                for (int c = 0; c < d; ++c) {
                    x(c) += v(c) * dt + inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
                }
            }
            for (int c = 0; c < d; ++c) {
                if (!std::isfinite(x(c))) {
                    throw EvaluationError("em_estimate: non-finite state on path " + std::to_string(i));
                }
            }
            for (std::size_t j = 0; j < width; ++j) per_path[i * width + j] = fs[j](x);
        }
    });
    std::vector<EstimatorResult> out;
    for (std::size_t j = 0; j < width; ++j) {
        std::vector<double> col(M);
        for (std::size_t i = 0; i < M; ++i) col[i] = per_path[i * width + j];
        EstimatorResult r = summarize(col, 1);
        r.seed = ens.seed();
        out.push_back(std::move(r));
    }
    return out;
}

EstimatorResult em_estimate(const ScalarFn& f, const DriftField& b, const Vec& x0, double t,
                            const BrownianEnsemble& ens) {
    const ScalarFn fs[] = {f};
    return em_estimates(fs, b, x0, t, ens).front();
}

WeightMoments weight_moments(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens) {
    const WeightSet w = doleans_weight(b, x0, ens);
    std::vector<double> sq(w.weights.size());
    for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = w.weights[i] * w.weights[i];
    WeightMoments out{summarize(w.weights, 1, w.valid), summarize(sq, 1, w.valid)};
    out.mean.seed = out.mean_square.seed = ens.seed();
    return out;
}

EstimatorResult exp_moment_diagnostic(const DriftField& b, double k, const Vec& x0, const BrownianEnsemble& ens) {
    check_dims(b, x0, ens, "exp_moment_diagnostic");
    const std::size_t M = ens.paths();
    const double dt = ens.dt();
    std::vector<double> per_path(M);
    std::vector<unsigned char> valid(M, 1);
    parallel_for(M, [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * static_cast<std::size_t>(ens.dim()));
        for (std::size_t i = begin; i < end; ++i) {
            double integral = 0.0;
            driftless_path(
                x0, ens, i, inc,
                [&](std::size_t step, const Vec& x, const Vec&) {
                    integral += b.checked(ens.time(step), x).squaredNorm() * dt;
                },
                [](std::size_t, const Vec&) {});
            const double e = k * integral;
            if (!(e <= kMaxLogWeight)) {
                valid[i] = 0;
                per_path[i] = 0.0;
            } else {
                per_path[i] = std::exp(e);
            }
        }
    });
    EstimatorResult r = summarize(per_path, 1, valid);
    r.seed = ens.seed();
    return r;
}

ScalingFit fourth_moment_scaling(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens,
                                 std::span<const double> lags) {
    check_dims(b, x0, ens, "fourth_moment_scaling");
    if (lags.size() < 2) throw DomainError("fourth_moment_scaling: need at least two lags");
    std::vector<std::size_t> lag_steps;
    for (double h : lags) {
        const std::size_t s = ens.node_of(h);
        if (s == 0) throw DomainError("fourth_moment_scaling: lags must be positive");
        lag_steps.push_back(s);
    }
    const std::size_t M = ens.paths();
    const std::size_t L = lags.size();
    const int d = ens.dim();
    const double dt = ens.dt();
    std::vector<double> per_path(M * L);
    parallel_for(M, [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * static_cast<std::size_t>(d));
        const auto du = static_cast<std::size_t>(d);
        std::vector<double> xs((ens.steps() + 1) * du);
        for (std::size_t i = begin; i < end; ++i) {
            ens.path_increments(i, inc);
            Vec x = x0;
            for (std::size_t c = 0; c < du; ++c) xs[c] = x(static_cast<Eigen::Index>(c));
            for (std::size_t k = 0; k < ens.steps(); ++k) {
                const Vec v = b.eval(ens.time(k), x);
                for (int c = 0; c < d; ++c) {
                    x(c) += v(c) * dt + inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
                }
                for (std::size_t c = 0; c < du; ++c) xs[(k + 1) * du + c] = x(static_cast<Eigen::Index>(c));
            }
            for (std::size_t l = 0; l < L; ++l) {
                const std::size_t s = lag_steps[l];
                double acc = 0.0;
                std::size_t windows = 0;
                for (std::size_t u = 0; u + s <= ens.steps(); u += s) {
                    double r2 = 0.0;
                    for (std::size_t c = 0; c < du; ++c) {
                        const double e = xs[(u + s) * du + c] - xs[u * du + c];
                        r2 += e * e;
                    }
                    acc += r2 * r2;
                    ++windows;
                }
                per_path[i * L + l] = acc / static_cast<double>(windows);
            }
        }
    });
    const EstimatorResult r = summarize(per_path, L);
    ScalingFit out;
    out.lags.assign(lags.begin(), lags.end());
    out.moments = r.mean;
    out.stderrs = r.stderr_;
    std::vector<double> lx(L), ly(L);
    for (std::size_t l = 0; l < L; ++l) {
        lx[l] = std::log(out.lags[l]);
        ly[l] = std::log(out.moments[l]);
    }
    out.fit = linear_fit(lx, ly);
    return out;
}

}  // namespace zvlab
