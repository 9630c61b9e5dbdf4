#include "zvlab/sensitivity.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"

#include <boost/math/quadrature/gauss.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>

namespace zvlab {

namespace {

std::size_t dsq(int d) { return static_cast<std::size_t>(d) * static_cast<std::size_t>(d); }

void store(const Mat& m, double* out) {
    const int d = static_cast<int>(m.rows());
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) out[j * d + i] = m(i, j);
    }
}

Mat load(const double* in, int d) {
    Mat m(d, d);
    for (int j = 0; j < d; ++j) {
        for (int i = 0; i < d; ++i) m(i, j) = in[j * d + i];
    }
    return m;
}

double condition_number(const Mat& m) {
    const Eigen::MatrixXd dense = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    return smin == 0.0 ? std::numeric_limits<double>::infinity() : s(0) / smin;
}

void require_smooth(const DriftField& b, const char* who) {
    if (!b.smooth || !b.has_grad()) {
        throw DomainError(std::string(who) + ": drift '" + b.label + "' is not smooth; mollify it first");
    }
}

void check_setup(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens, const char* who) {
    if (b.dim != ens.dim() || x0.size() != b.dim) {
        throw DomainError(std::string(who) + ": drift, start point and ensemble dimensions differ");
    }
}

// Joint Euler scheme for (X, Z) up to node n. step(k, x, Z, dB) runs before
// each update; the state at node n is returned through x and z.
template <typename Step>
void flow_path(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens, std::size_t path, std::size_t n,
               std::vector<double>& inc, Vec& x, Mat& z, Step&& step) {
    const int d = ens.dim();
    const double dt = ens.dt();
    ens.path_increments(path, inc);
    x = x0;
    z = Mat::Identity(d, d);
    for (std::size_t k = 0; k < n; ++k) {
        const double* dB = inc.data() + k * static_cast<std::size_t>(d);
        step(k, x, z, dB);
        const double tk = ens.time(k);
        const Vec v = b.eval(tk, x);
        const Mat g = b.grad(tk, x);
        z += dt * (g * z);
        for (int c = 0; c < d; ++c) x(c) += v(c) * dt + dB[c];
    }
    if (!x.allFinite() || !z.allFinite()) {
        throw EvaluationError("flow: non-finite state or variation on path " + std::to_string(path));
    }
}

void em_only(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens, std::size_t n,
             std::span<const double> inc, Vec& x) {
    const int d = ens.dim();
    const double dt = ens.dt();
    x = x0;
    for (std::size_t k = 0; k < n; ++k) {
        const Vec v = b.eval(ens.time(k), x);
        for (int c = 0; c < d; ++c) x(c) += v(c) * dt + inc[k * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
    }
}

EstimatorResult column_block(const std::vector<double>& per_path, std::size_t width, std::size_t offset,
                             std::size_t count, std::span<const unsigned char> keep, std::uint64_t seed) {
    const std::size_t M = per_path.size() / width;
    std::vector<double> block(M * count);
    for (std::size_t i = 0; i < M; ++i) {
        for (std::size_t j = 0; j < count; ++j) block[i * count + j] = per_path[i * width + offset + j];
    }
    EstimatorResult r = summarize(block, count, keep);
    r.seed = seed;
    return r;
}

}  // namespace

Mat VariationEnsemble::at(std::size_t path, std::size_t level) const {
    return load(Z.data() + (path * levels + level) * dsq(dim), dim);
}

VariationEnsemble first_variation(const DriftField& b, const PathEnsemble& paths, double r_start) {
    require_smooth(b, "first_variation");
    if (b.dim != paths.dim) throw DomainError("first_variation: drift and path dimensions differ");
    const double steps_f = r_start / paths.dt;
    const auto r_node = static_cast<std::size_t>(std::llround(steps_f));
    if (r_start < 0.0 || std::abs(steps_f - static_cast<double>(r_node)) > 1e-9 || r_node >= paths.levels) {
        throw DomainError("first_variation: r_start must be a grid node inside the horizon");
    }
    VariationEnsemble out;
    out.paths = paths.paths;
    out.levels = paths.levels;
    out.dim = paths.dim;
    out.dt = paths.dt;
    out.r_start = r_start;
    out.r_node = r_node;
    out.valid = paths.valid;
    const int d = paths.dim;
    const std::size_t w = dsq(d);
    out.Z.assign(out.paths * out.levels * w, 0.0);
    parallel_for(out.paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (!paths.valid[i]) continue;
            double* row = out.Z.data() + i * out.levels * w;
            Mat z = Mat::Identity(d, d);
            store(z, row + r_node * w);
            for (std::size_t k = r_node; k + 1 < out.levels; ++k) {
                const Mat g = b.grad(static_cast<double>(k) * out.dt, paths.state_vec(i, k));
                z += out.dt * (g * z);
                if (!z.allFinite()) {
                    throw EvaluationError("first_variation: non-finite entry on path " + std::to_string(i) +
                                          " at step " + std::to_string(k));
                }
                store(z, row + (k + 1) * w);
            }
        }
    });
    return out;
}

VariationEnsemble malliavin_derivative(const VariationEnsemble& var, double r) {
    if (var.r_node != 0) throw DomainError("malliavin_derivative: variation must start at r = 0");
    const double steps_f = r / var.dt;
    const auto r_node = static_cast<std::size_t>(std::llround(steps_f));
    if (r < 0.0 || std::abs(steps_f - static_cast<double>(r_node)) > 1e-9 || r_node >= var.levels) {
        throw DomainError("malliavin_derivative: r must be a grid node inside the horizon");
    }
    VariationEnsemble out = var;
    out.r_start = r;
    out.r_node = r_node;
    const int d = var.dim;
    const std::size_t w = dsq(d);
    std::fill(out.Z.begin(), out.Z.end(), 0.0);
    parallel_for(var.paths, [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            if (!var.valid[i]) continue;
            const Mat zr = var.at(i, r_node);
            const double cond = condition_number(zr);
            if (!(cond < 1e12)) {
                throw NumericalError("malliavin_derivative: Z_r singular on path " + std::to_string(i) +
                                     " (condition number " + format_double(cond) + ")");
            }
            const Mat inv = zr.inverse();
            for (std::size_t k = r_node; k < var.levels; ++k) {
                store(var.at(i, k) * inv, out.Z.data() + (i * var.levels + k) * w);
            }
        }
    });
    return out;
}

std::vector<double> WeightFunction::cell_weights(double dt, std::size_t steps) const {
    std::vector<double> out(steps);
    for (std::size_t k = 0; k < steps; ++k) {
        const double lo = dt * static_cast<double>(k);
        out[k] = boost::math::quadrature::gauss<double, 7>::integrate(a, lo, lo + dt) / dt;
    }
    return out;
}

void validate_weight(const WeightFunction& w, double tolerance) {
    if (!(w.t > 0.0) || !w.a) throw DomainError("weight '" + w.label + "': needs t > 0 and a function");
    const double total = boost::math::quadrature::gauss_kronrod<double, 31>::integrate(w.a, 0.0, w.t, 10, 1e-13);
    if (!(std::abs(total - 1.0) <= tolerance)) {
        throw DomainError("weight '" + w.label + "': integral over [0, t] is " + format_double(total) + ", not 1");
    }
}

const std::vector<std::string>& weight_presets() {
    static const std::vector<std::string> names{"constant", "front", "back"};
    return names;
}

WeightFunction make_weight(const std::string& name, double t) {
    if (!(t > 0.0)) throw DomainError("make_weight: t must be positive");
    WeightFunction w;
    w.label = name;
    w.t = t;
    if (name == "constant") {
        w.a = [t](double) { return 1.0 / t; };
    } else if (name == "front") {
        w.a = [t](double s) { return 2.0 * (t - s) / (t * t); };
    } else if (name == "back") {
        w.a = [t](double s) { return 2.0 * s / (t * t); };
    } else {
        throw UsageError("unknown weight '" + name + "' (constant, front, back)");
    }
    validate_weight(w);
    return w;
}

const std::vector<std::string>& payoff_presets() {
    static const std::vector<std::string> names{"identity", "square", "tanh", "constant"};
    return names;
}

Payoff make_payoff(const std::string& name, const std::map<std::string, std::string>& params) {
    Payoff p;
    p.label = name;
    if (name == "identity") {
        p.phi = [](const Vec& x) { return x(0); };
        p.dphi = [](const Vec& x) {
            Vec g = Vec::Zero(x.size());
            g(0) = 1.0;
            return g;
        };
    } else if (name == "square") {
        p.phi = [](const Vec& x) { return x.squaredNorm(); };
        p.dphi = [](const Vec& x) -> Vec { return 2.0 * x; };
    } else if (name == "tanh") {
        p.phi = [](const Vec& x) { return std::tanh(x(0)); };
        p.dphi = [](const Vec& x) {
            Vec g = Vec::Zero(x.size());
            const double th = std::tanh(x(0));
            g(0) = 1.0 - th * th;
            return g;
        };
        p.bounded = true;
    } else if (name == "constant") {
        double c = 1.0;
        if (auto it = params.find("value"); it != params.end()) c = std::stod(it->second);
        p.phi = [c](const Vec&) { return c; };
        p.dphi = [](const Vec& x) -> Vec { return Vec::Zero(x.size()); };
        p.bounded = true;
    } else {
        throw UsageError("unknown payoff '" + name + "' (identity, square, tanh, constant)");
    }
    return p;
}

double payoff_gradient_consistency(const Payoff& p, const Vec& x, double h) {
    if (!p.has_grad()) throw DomainError("payoff '" + p.label + "' has no gradient");
    const Vec g = p.dphi(x);
    double worst = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        Vec xp = x, xm = x;
        xp(i) += h;
        xm(i) -= h;
        worst = std::max(worst, std::abs(g(i) - (p(xp) - p(xm)) / (2.0 * h)));
    }
    return worst;
}

std::vector<EstimatorResult> bel_gradients(const Payoff& phi, const DriftField& b, const Vec& x0, double t,
                                           std::span<const WeightFunction> weights, const BrownianEnsemble& ens) {
    require_smooth(b, "bel_gradient");
    check_setup(b, x0, ens, "bel_gradient");
    const std::size_t n = ens.node_of(t);
    if (n == 0) throw DomainError("bel_gradient: t must be positive");
    std::vector<std::vector<double>> cells;
    for (const auto& w : weights) {
        if (std::abs(w.t - t) > 1e-12 * std::max(1.0, t)) {
            throw DomainError("bel_gradient: weight '" + w.label + "' is normalized on a different horizon");
        }
        validate_weight(w);
        cells.push_back(w.cell_weights(ens.dt(), n));
    }
    const int d = ens.dim();
    const auto du = static_cast<std::size_t>(d);
    const std::size_t W = weights.size();
    const std::size_t width = W * du;
    std::vector<double> per_path(ens.paths() * width);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * du);
        std::vector<Vec> sums(W);
        Vec x;
        Mat z;
        for (std::size_t i = begin; i < end; ++i) {
            for (auto& s : sums) s = Vec::Zero(d);
            flow_path(b, x0, ens, i, n, inc, x, z, [&](std::size_t k, const Vec&, const Mat& zk, const double* dB) {
                Vec db(d);
                for (int c = 0; c < d; ++c) db(c) = dB[c];
                const Vec zt = zk.transpose() * db;
                for (std::size_t w = 0; w < W; ++w) sums[w] += cells[w][k] * zt;
            });
            const double value = phi(x);
            for (std::size_t w = 0; w < W; ++w) {
                for (std::size_t c = 0; c < du; ++c) {
                    per_path[i * width + w * du + c] = value * sums[w](static_cast<Eigen::Index>(c));
                }
            }
        }
    });
    std::vector<EstimatorResult> out;
    for (std::size_t w = 0; w < W; ++w) {
        EstimatorResult r = column_block(per_path, width, w * du, du, {}, ens.seed());
        r.name = "bel-" + weights[w].label;
        out.push_back(std::move(r));
    }
    return out;
}

EstimatorResult bel_gradient(const Payoff& phi, const DriftField& b, const Vec& x0, double t,
                             const WeightFunction& a, const BrownianEnsemble& ens) {
    return bel_gradients(phi, b, x0, t, std::span<const WeightFunction>(&a, 1), ens).front();
}

EstimatorResult fd_gradient_oracle(const Payoff& phi, const DriftField& b, const Vec& x0, double t, double h,
                                   const BrownianEnsemble& ens) {
    if (!(h > 0.0)) throw DomainError("fd_gradient_oracle: h must be positive");
    check_setup(b, x0, ens, "fd_gradient_oracle");
    const std::size_t n = ens.node_of(t);
    const int d = ens.dim();
    const auto du = static_cast<std::size_t>(d);
    std::vector<double> per_path(ens.paths() * du);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * du);
        Vec xp, xm;
        for (std::size_t i = begin; i < end; ++i) {
            ens.path_increments(i, inc);
            for (int c = 0; c < d; ++c) {
                Vec sp = x0, sm = x0;
                sp(c) += h;
                sm(c) -= h;
                em_only(b, sp, ens, n, inc, xp);
                em_only(b, sm, ens, n, inc, xm);
                per_path[i * du + static_cast<std::size_t>(c)] = (phi(xp) - phi(xm)) / (2.0 * h);
            }
        }
    });
    EstimatorResult r = summarize(per_path, du);
    r.name = "fd";
    r.seed = ens.seed();
    return r;
}

EstimatorResult pathwise_gradient(const Payoff& phi, const DriftField& b, const Vec& x0, double t,
                                  const BrownianEnsemble& ens) {
    if (!phi.has_grad()) throw DomainError("pathwise_gradient: payoff '" + phi.label + "' has no gradient");
    require_smooth(b, "pathwise_gradient");
    check_setup(b, x0, ens, "pathwise_gradient");
    const std::size_t n = ens.node_of(t);
    const int d = ens.dim();
    const auto du = static_cast<std::size_t>(d);
    std::vector<double> per_path(ens.paths() * du);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * du);
        Vec x;
        Mat z;
        for (std::size_t i = begin; i < end; ++i) {
            flow_path(b, x0, ens, i, n, inc, x, z, [](std::size_t, const Vec&, const Mat&, const double*) {});
            const Vec g = z.transpose() * phi.dphi(x);
            for (std::size_t c = 0; c < du; ++c) per_path[i * du + c] = g(static_cast<Eigen::Index>(c));
        }
    });
    EstimatorResult r = summarize(per_path, du);
    r.name = "pathwise";
    r.seed = ens.seed();
    return r;
}

std::vector<double> default_r_grid(double t, double dt, int levels) {
    const double c = 0.5 * t;
    auto snap = [dt](double r) { return dt * std::round(r / dt); };
    std::vector<double> grid{snap(c)};
    for (int m = 1; m <= levels; ++m) {
        const double lag = c * std::ldexp(1.0, -m);
        if (lag < dt * (1.0 - 1e-9)) break;
        grid.push_back(snap(c + lag));
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    return grid;
}

HolderScan holder_scan(const DriftField& b, const Vec& x0, double t, std::span<const double> r_grid,
                       const BrownianEnsemble& ens) {
    require_smooth(b, "holder_scan");
    check_setup(b, x0, ens, "holder_scan");
    const std::size_t n = ens.node_of(t);
    HolderScan scan;
    scan.r_grid.assign(r_grid.begin(), r_grid.end());
    std::sort(scan.r_grid.begin(), scan.r_grid.end());
    std::vector<std::size_t> nodes;
    for (double r : scan.r_grid) {
        if (r < 0.0 || r > t) throw DomainError("holder_scan: r-grid must lie inside [0, t]");
        nodes.push_back(ens.node_of(r));
    }
    const std::size_t R = nodes.size();
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < R; ++a) {
        for (std::size_t c = a + 1; c < R; ++c) pairs.emplace_back(a, c);
    }
    const std::size_t P = pairs.size();
    const std::size_t width = P + R;
    const int d = ens.dim();
    std::vector<double> per_path(ens.paths() * width);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps() * static_cast<std::size_t>(d));
        std::vector<Mat> zr(R);
        std::vector<Mat> dr(R);
        Vec x;
        Mat z;
        for (std::size_t i = begin; i < end; ++i) {
            flow_path(b, x0, ens, i, n, inc, x, z, [&](std::size_t k, const Vec&, const Mat& zk, const double*) {
                for (std::size_t j = 0; j < R; ++j) {
                    if (nodes[j] == k) zr[j] = zk;
                }
            });
            for (std::size_t j = 0; j < R; ++j) {
                if (nodes[j] == n) zr[j] = z;
                dr[j] = z * zr[j].inverse();
            }
            double* row = per_path.data() + i * width;
            for (std::size_t p = 0; p < P; ++p) row[p] = (dr[pairs[p].second] - dr[pairs[p].first]).squaredNorm();
            for (std::size_t j = 0; j < R; ++j) row[P + j] = dr[j].squaredNorm();
        }
    });
    const EstimatorResult r = summarize(per_path, width);
    std::vector<double> lx, ly;
    bool all_zero = true;
    for (std::size_t p = 0; p < P; ++p) {
        HolderPair hp;
        hp.r = scan.r_grid[pairs[p].first];
        hp.r_prime = scan.r_grid[pairs[p].second];
        hp.msd = r.mean[p];
        hp.stderr_ = r.stderr_[p];
        scan.pairs.push_back(hp);
        if (hp.msd > 0.0) {
            all_zero = false;
            lx.push_back(std::log(hp.r_prime - hp.r));
            ly.push_back(std::log(hp.msd));
        }
    }
    scan.degenerate_zero = all_zero;
    if (!all_zero && lx.size() >= 2) scan.fit = linear_fit(lx, ly);
    for (std::size_t j = 0; j < R; ++j) {
        scan.moments.push_back(r.mean[P + j]);
        scan.moment_max = std::max(scan.moment_max, r.mean[P + j]);
    }
    return scan;
}

EstimatorResult v_exponential_moment(const ZvonkinSolution& sol, const PathEnsemble& paths, double alpha) {
    const int d = sol.dim();
    if (paths.dim != d) throw DomainError("v_exponential_moment: path and solution dimensions differ");
    const auto du = static_cast<std::size_t>(d);
    const double horizon = paths.dt * static_cast<double>(paths.levels - 1);
    if (horizon > sol.grid().T * (1.0 + 1e-12)) {
        throw DomainError("v_exponential_moment: paths run past the solution horizon");
    }
    std::vector<double> per_path(paths.paths, 0.0);
    std::vector<unsigned char> keep = paths.valid;
    parallel_for(paths.paths, [&](std::size_t begin, std::size_t end) {
        std::vector<double> hess(du * du * du);
        for (std::size_t i = begin; i < end; ++i) {
            if (!keep[i]) continue;
            double v = 0.0;
            try {
                for (std::size_t k = 0; k + 1 < paths.levels; ++k) {
                    const double tk = paths.dt * static_cast<double>(k);
                    const Vec x = paths.state_vec(i, k);
                    const Mat g = (Mat::Identity(d, d) + sol.gradient(tk, x)).inverse();
                    sol.hessian(tk, x, hess);
                    double norm2 = 0.0;
                    for (std::size_t a = 0; a < du; ++a) {
                        for (std::size_t j = 0; j < du; ++j) {
                            for (std::size_t c = 0; c < du; ++c) {
                                double s = 0.0;
                                for (std::size_t l = 0; l < du; ++l) {
                                    s += hess[(a * du + j) * du + l] * g(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(c));
                                }
                                norm2 += s * s;
                            }
                        }
                    }
                    v += norm2 * paths.dt;
                }
            } catch (const ExtrapolationError&) {
                keep[i] = 0;
                continue;
            }
            if (!(alpha * v <= kMaxLogWeight)) {
                keep[i] = 0;
                continue;
            }
            per_path[i] = std::exp(alpha * v);
        }
    });
    EstimatorResult r = summarize(per_path, 1, keep);
    r.name = "v-exp-moment";
    return r;
}

CsvTable gradient_table(std::span<const GradientRow> rows, double dt) {
    CsvTable t;
    t.header = {"method", "axis", "mean", "stderr", "M", "dt", "h", "weight", "seed"};
    for (const auto& row : rows) {
        for (std::size_t c = 0; c < row.result.mean.size(); ++c) {
            t.add_row({row.method, static_cast<std::int64_t>(c), row.result.mean[c], row.result.stderr_[c],
                       static_cast<std::int64_t>(row.result.samples), dt, row.h, row.weight,
                       std::to_string(row.result.seed)});
        }
    }
    return t;
}

CsvTable holder_table(const HolderScan& scan) {
    CsvTable t;
    t.header = {"r", "r_prime", "msd", "fit_slope", "fit_r2"};
    for (const auto& p : scan.pairs) t.add_row({p.r, p.r_prime, p.msd, scan.fit.slope, scan.fit.r2});
    return t;
}

}  // namespace zvlab
