#include "zvlab/drift.hpp"

#include "zvlab/csv.hpp"
#include "zvlab/error.hpp"
#include "zvlab/stats.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>
#include <tuple>

namespace zvlab {

namespace {

std::string describe_point(double t, const Vec& x) {
    std::ostringstream os;
    os << "(t=" << format_double(t) << ", x=[";
    for (int i = 0; i < x.size(); ++i) os << (i ? "," : "") << format_double(x(i));
    os << "])";
    return os.str();
}

double param_or(const std::map<std::string, std::string>& params, const std::string& key, double fallback) {
    auto it = params.find(key);
    if (it == params.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw UsageError("drift parameter '" + key + "' is not a number: " + it->second);
    }
}

// CDF-shaped profile of the 1-d bump (1-u^2)^4 / (256/315):
// integral_{-1}^{u} k = 1/2 + (315/256) P(u), P the odd antiderivative.
double bump_antiderivative(double u) {
    const double u2 = u * u;
    return u * (1.0 + u2 * (-4.0 / 3.0 + u2 * (6.0 / 5.0 + u2 * (-4.0 / 7.0 + u2 / 9.0))));
}

}  // namespace

Vec DriftField::checked(double t, const Vec& x) const {
    Vec v = eval(t, x);
    for (int i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v(i))) {
            throw EvaluationError("drift '" + label + "' is not finite at " + describe_point(t, x));
        }
    }
    return v;
}

DriftField add(const DriftField& a, const DriftField& b) {
    if (a.dim != b.dim) throw DomainError("add: dimension mismatch");
    DriftField out;
    out.dim = a.dim;
    out.eval = [ea = a.eval, eb = b.eval](double t, const Vec& x) -> Vec { return ea(t, x) + eb(t, x); };
    if (a.has_grad() && b.has_grad()) {
        out.grad = [ga = a.grad, gb = b.grad](double t, const Vec& x) -> Mat { return ga(t, x) + gb(t, x); };
    }
    out.smooth = a.smooth && b.smooth;
    out.autonomous = a.autonomous && b.autonomous;
    if (a.support_radius && b.support_radius) out.support_radius = std::max(*a.support_radius, *b.support_radius);
    if (a.sup_bound && b.sup_bound) out.sup_bound = *a.sup_bound + *b.sup_bound;
    out.label = "(" + a.label + ")+(" + b.label + ")";
    return out;
}

DriftField scale(const DriftField& f, double c) {
    DriftField out = f;
    out.eval = [e = f.eval, c](double t, const Vec& x) -> Vec { return c * e(t, x); };
    if (f.has_grad()) out.grad = [g = f.grad, c](double t, const Vec& x) -> Mat { return c * g(t, x); };
    if (f.convolve) {
        out.convolve = [cv = f.convolve, c](double t, const Vec& x, double eps) {
            auto [v, j] = cv(t, x, eps);
            return std::pair<Vec, Mat>(c * v, c * j);
        };
    }
    if (f.sup_bound) out.sup_bound = std::abs(c) * *f.sup_bound;
    out.label = format_double(c) + "*(" + f.label + ")";
    return out;
}

double gradient_consistency(const DriftField& f, double t, const Vec& x, double h) {
    if (!f.has_grad()) throw DomainError("gradient_consistency: field '" + f.label + "' has no gradient");
    const Mat g = f.grad(t, x);
    double worst = 0.0;
    for (int j = 0; j < f.dim; ++j) {
        Vec xp = x, xm = x;
        xp(j) += h;
        xm(j) -= h;
        const Vec fd = (f.eval(t, xp) - f.eval(t, xm)) / (2.0 * h);
        for (int i = 0; i < f.dim; ++i) {
            worst = std::max(worst, std::abs(fd(i) - g(i, j)) / std::max(1.0, std::abs(g(i, j))));
        }
    }
    return worst;
}

DriftField zero_drift(int dim) {
    DriftField f;
    f.dim = dim;
    f.eval = [dim](double, const Vec&) -> Vec { return Vec::Zero(dim); };
    f.grad = [dim](double, const Vec&) -> Mat { return Mat::Zero(dim, dim); };
    f.convolve = [dim](double, const Vec&, double) { return std::pair<Vec, Mat>(Vec::Zero(dim), Mat::Zero(dim, dim)); };
    f.smooth = true;
    f.autonomous = true;
    f.sup_bound = 0.0;
    f.label = "zero";
    return f;
}

DriftField constant_drift(const Vec& mu) {
    const int dim = static_cast<int>(mu.size());
    DriftField f;
    f.dim = dim;
    f.eval = [mu](double, const Vec&) -> Vec { return mu; };
    f.grad = [dim](double, const Vec&) -> Mat { return Mat::Zero(dim, dim); };
    f.convolve = [mu, dim](double, const Vec&, double) { return std::pair<Vec, Mat>(mu, Mat::Zero(dim, dim)); };
    f.smooth = true;
    f.autonomous = true;
    f.sup_bound = mu.norm();
    std::string label = "constant(mu=";
    for (int i = 0; i < dim; ++i) label += (i ? ";" : "") + format_double(mu(i));
    f.label = label + ")";
    return f;
}

DriftField ou_drift(int dim, double theta) {
    DriftField f;
    f.dim = dim;
    f.eval = [theta](double, const Vec& x) -> Vec { return -theta * x; };
    f.grad = [theta, dim](double, const Vec&) -> Mat { return -theta * Mat::Identity(dim, dim); };
    // A symmetric kernel reproduces affine functions exactly.
    f.convolve = [theta, dim](double, const Vec& x, double) {
        return std::pair<Vec, Mat>(-theta * x, -theta * Mat::Identity(dim, dim));
    };
    f.smooth = true;
    f.autonomous = true;
    f.label = "ou(theta=" + format_double(theta) + ")";
    return f;
}

DriftField sign_drift(int dim, double amplitude) {
    DriftField f;
    f.dim = dim;
    f.eval = [amplitude, dim](double, const Vec& x) -> Vec {
        Vec v(dim);
        for (int i = 0; i < dim; ++i) v(i) = amplitude * static_cast<double>((x(i) > 0.0) - (x(i) < 0.0));
        return v;
    };
    if (dim == 1) {
        // Closed form: amplitude * (2 K(x/eps) - 1), K the CDF of the 1-d bump.
        f.convolve = [amplitude](double, const Vec& x, double eps) {
            const double u = x(0) / eps;
            Vec v(1);
            Mat j(1, 1);
            if (u >= 1.0) {
                v(0) = amplitude;
                j(0, 0) = 0.0;
            } else if (u <= -1.0) {
                v(0) = -amplitude;
                j(0, 0) = 0.0;
            } else {
                const double w = 1.0 - u * u;
                v(0) = amplitude * (315.0 / 128.0) * bump_antiderivative(u);
                j(0, 0) = amplitude * (315.0 / 128.0) * w * w * w * w / eps;
            }
            return std::pair<Vec, Mat>(v, j);
        };
    }
    f.smooth = false;
    f.autonomous = true;
    f.sup_bound = std::abs(amplitude) * std::sqrt(static_cast<double>(dim));
    f.label = "sign(amplitude=" + format_double(amplitude) + ")";
    return f;
}

namespace {

struct DriftTable {
    int dim = 1;
    std::vector<double> times;
    std::vector<std::vector<double>> axes;  // per spatial axis, ascending
    std::vector<double> values;             // (time, node) major, dim components
    std::size_t nodes = 1;

    // Index of the cell containing v in sorted axis and the fractional offset.
    static std::pair<std::size_t, double> locate(const std::vector<double>& axis, double v) {
        if (axis.size() == 1) return {0, 0.0};
        if (v <= axis.front()) return {0, 0.0};
        if (v >= axis.back()) return {axis.size() - 2, 1.0};
        auto it = std::upper_bound(axis.begin(), axis.end(), v);
        const auto hi = static_cast<std::size_t>(it - axis.begin());
        const std::size_t lo = hi - 1;
        return {lo, (v - axis[lo]) / (axis[hi] - axis[lo])};
    }

    Vec eval(double t, const Vec& x) const {
        Vec out = Vec::Zero(dim);
        for (int a = 0; a < dim; ++a) {
            if (x(a) < axes[a].front() || x(a) > axes[a].back()) return out;
        }
        auto [tc, tf] = locate(times, t);
        std::size_t cell[kMaxDim];
        double frac[kMaxDim];
        for (int a = 0; a < dim; ++a) std::tie(cell[a], frac[a]) = locate(axes[a], x(a));

        const int corners = 1 << dim;
        for (int tk = 0; tk < (times.size() > 1 ? 2 : 1); ++tk) {
            const double wt = times.size() > 1 ? (tk ? tf : 1.0 - tf) : 1.0;
            if (wt == 0.0) continue;
            for (int c = 0; c < corners; ++c) {
                double w = wt;
                std::size_t node = 0;
                for (int a = 0; a < dim; ++a) {
                    const int bit = (c >> a) & 1;
                    const std::size_t n_a = axes[a].size();
                    const std::size_t idx = std::min(cell[a] + static_cast<std::size_t>(bit), n_a - 1);
                    w *= bit ? frac[a] : 1.0 - frac[a];
                    node = node * n_a + idx;
                }
                if (w == 0.0) continue;
                const std::size_t base = ((tc + static_cast<std::size_t>(tk)) * nodes + node) * static_cast<std::size_t>(dim);
                for (int i = 0; i < dim; ++i) out(i) += w * values[base + static_cast<std::size_t>(i)];
            }
        }
        return out;
    }
};

}  // namespace

DriftField grid_drift(const std::filesystem::path& csv, int dim) {
    if (dim < 1 || dim > kMaxDim) throw DomainError("grid_drift: unsupported dimension");
    const CsvText text = read_csv(csv);
    const auto width = static_cast<std::size_t>(1 + 2 * dim);
    if (text.header.size() != width) {
        throw IoError("grid drift csv " + csv.string() + ": expected columns t,x1..x" + std::to_string(dim) +
                      ",b1..b" + std::to_string(dim));
    }
    auto table = std::make_shared<DriftTable>();
    table->dim = dim;
    table->axes.resize(static_cast<std::size_t>(dim));

    std::vector<std::vector<double>> rows;
    rows.reserve(text.rows.size());
    for (const auto& r : text.rows) {
        if (r.size() != width) throw IoError("grid drift csv " + csv.string() + ": ragged row");
        std::vector<double> row(width);
        for (std::size_t c = 0; c < width; ++c) row[c] = parse_double(r[c]);
        rows.push_back(std::move(row));
    }
    if (rows.empty()) throw IoError("grid drift csv " + csv.string() + ": no data rows");

    for (const auto& row : rows) {
        if (table->times.empty() || row[0] != table->times.back()) {
            if (!table->times.empty() && row[0] < table->times.back()) {
                throw IoError("grid drift csv " + csv.string() + ": time column must be non-decreasing");
            }
            table->times.push_back(row[0]);
        }
    }
    const std::size_t per_time = rows.size() / table->times.size();
    if (per_time * table->times.size() != rows.size()) {
        throw IoError("grid drift csv " + csv.string() + ": every time level must list the same nodes");
    }
    for (int a = 0; a < dim; ++a) {
        auto& axis = table->axes[static_cast<std::size_t>(a)];
        for (std::size_t i = 0; i < per_time; ++i) axis.push_back(rows[i][1 + static_cast<std::size_t>(a)]);
        std::sort(axis.begin(), axis.end());
        axis.erase(std::unique(axis.begin(), axis.end()), axis.end());
        table->nodes *= axis.size();
    }
    if (table->nodes != per_time) {
        throw IoError("grid drift csv " + csv.string() + ": nodes do not form a tensor grid");
    }

    table->values.resize(rows.size() * static_cast<std::size_t>(dim));
    double radius2 = 0.0;
    for (int a = 0; a < dim; ++a) {
        const auto& axis = table->axes[static_cast<std::size_t>(a)];
        const double m = std::max(std::abs(axis.front()), std::abs(axis.back()));
        radius2 += m * m;
    }
    double sup = 0.0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
        // Row-major: x1 varies slowest, time slowest of all.
        const std::size_t k = r / per_time;
        if (rows[r][0] != table->times[k]) throw IoError("grid drift csv " + csv.string() + ": rows not grouped by time");
        std::size_t node = 0;
        for (int a = 0; a < dim; ++a) {
            const auto& axis = table->axes[static_cast<std::size_t>(a)];
            auto it = std::lower_bound(axis.begin(), axis.end(), rows[r][1 + static_cast<std::size_t>(a)]);
            node = node * axis.size() + static_cast<std::size_t>(it - axis.begin());
        }
        if (node != r % per_time) throw IoError("grid drift csv " + csv.string() + ": nodes not in row-major order");
        double norm2 = 0.0;
        for (int i = 0; i < dim; ++i) {
            const double v = rows[r][1 + static_cast<std::size_t>(dim + i)];
            if (!std::isfinite(v)) throw IoError("grid drift csv " + csv.string() + ": non-finite value");
            table->values[r * static_cast<std::size_t>(dim) + static_cast<std::size_t>(i)] = v;
            norm2 += v * v;
        }
        sup = std::max(sup, std::sqrt(norm2));
    }

    DriftField f;
    f.dim = dim;
    f.eval = [table](double t, const Vec& x) -> Vec { return table->eval(t, x); };
    f.smooth = false;
    f.autonomous = table->times.size() == 1;
    f.support_radius = std::sqrt(radius2);
    f.sup_bound = sup;
    f.label = "custom-grid(" + csv.filename().string() + ")";
    return f;
}

const std::vector<std::string>& drift_presets() {
    static const std::vector<std::string> names{"zero", "constant", "ou", "sign", "custom-grid"};
    return names;
}

DriftField make_drift(const std::string& name, int dim, const std::map<std::string, std::string>& params) {
    if (name == "zero") return zero_drift(dim);
    if (name == "constant") return constant_drift(Vec::Constant(dim, param_or(params, "mu", 0.5)));
    if (name == "ou") return ou_drift(dim, param_or(params, "theta", 1.0));
    if (name == "sign") return sign_drift(dim, param_or(params, "amplitude", 1.0));
    if (name == "custom-grid") {
        auto it = params.find("file");
        if (it == params.end()) throw UsageError("custom-grid drift requires a 'file' parameter");
        return grid_drift(it->second, dim);
    }
    std::string known;
    for (const auto& n : drift_presets()) known += (known.empty() ? "" : ", ") + n;
    throw UsageError("unknown drift preset '" + name + "' (known: " + known + ")");
}

}  // namespace zvlab
