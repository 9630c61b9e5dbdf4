#include "zvlab/lamperti.hpp"

#include "zvlab/error.hpp"
#include "zvlab/parallel.hpp"
#include "zvlab/stats.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>

namespace zvlab {

namespace {

// Cells are short in Lambda, so a fixed 10-point Gauss-Legendre rule is
// accurate to rounding for smooth sigma.
double integrate_inverse_sigma(const ScalarField& sigma, double a, double b) {
    if (a == b) return 0.0;
    auto f = [&sigma](double z) { return 1.0 / sigma(z); };
    return boost::math::quadrature::gauss<double, 10>::integrate(f, a, b);
}

// RK4 march of dy/dLambda = sigma(y) from lo in Lambda-steps of size step;
// returns the interior nodes strictly below hi.
std::vector<double> march_nodes(const ScalarField& sigma, double lo, double hi, double step, std::size_t cap) {
    std::vector<double> ys{lo};
    while (true) {
        if (ys.size() > cap) throw DomainError("lamperti: node placement did not reach the upper end");
        const double y = ys.back();
        const double k1 = sigma(y);
        const double k2 = sigma(y + 0.5 * step * k1);
        const double k3 = sigma(y + 0.5 * step * k2);
        const double k4 = sigma(y + step * k3);
        double next = y + step * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0;
        if (!(next > y) || !std::isfinite(next)) next = y + step * k1;
        if (next >= hi - 0.25 * step * sigma(hi)) break;
        ys.push_back(next);
    }
    return ys;
}

}  // namespace

LampertiMap::LampertiMap(ScalarField sigma, ScalarField drift, const LampertiOptions& opts)
    : sigma_(std::move(sigma)), drift_(std::move(drift)), sigma_prime_(opts.sigma_prime) {
    if (!(opts.lo < opts.hi)) throw DomainError("lamperti: need lo < hi");
    if (opts.table_points < 3) throw DomainError("lamperti: table needs at least 3 points");
    y0_ = opts.y0.value_or(0.5 * (opts.lo + opts.hi));
    if (!(y0_ >= opts.lo && y0_ <= opts.hi)) throw DomainError("lamperti: base point outside the interval");

    const std::size_t n = opts.table_points;
    const double hf = (opts.hi - opts.lo) / static_cast<double>(20 * n);
    double crude = 0.0;
    for (std::size_t i = 0; i <= 20 * n; ++i) {
        const double y = i == 20 * n ? opts.hi : opts.lo + hf * static_cast<double>(i);
        const double s = sigma_(y);
        if (!(s >= opts.sigma_min) || !std::isfinite(s)) {
            throw DomainError("lamperti: sigma(" + format_double(y) + ") = " + format_double(s) +
                              " is below sigma_min = " + format_double(opts.sigma_min));
        }
        crude += (i == 0 || i == 20 * n ? 0.5 : 1.0) * hf / s;
    }

    // Nodes equispaced in Lambda: a first march measures the total, a second
    // places n nodes.
    const double s0 = crude / static_cast<double>(n - 1);
    const std::vector<double> probe = march_nodes(sigma_, opts.lo, opts.hi, s0, 100 * n);
    const double total = s0 * static_cast<double>(probe.size() - 1) + integrate_inverse_sigma(sigma_, probe.back(), opts.hi);
    ys_ = march_nodes(sigma_, opts.lo, opts.hi, total / static_cast<double>(n - 1), 100 * n);
    ys_.push_back(opts.hi);

    zs_.assign(ys_.size(), 0.0);
    for (std::size_t j = 1; j < ys_.size(); ++j) {
        zs_[j] = zs_[j - 1] + integrate_inverse_sigma(sigma_, ys_[j - 1], ys_[j]);
    }
    const std::size_t c = std::min<std::size_t>(
        static_cast<std::size_t>(std::upper_bound(ys_.begin(), ys_.end(), y0_) - ys_.begin()) - 1, ys_.size() - 2);
    const double offset = zs_[c] + integrate_inverse_sigma(sigma_, ys_[c], y0_);
    for (double& z : zs_) z -= offset;

    slopes_.resize(ys_.size());
    for (std::size_t j = 0; j < ys_.size(); ++j) slopes_[j] = 1.0 / sigma_(ys_[j]);
    // Fritsch-Carlson limiter keeps every cubic piece monotone.
    for (std::size_t j = 0; j + 1 < ys_.size(); ++j) {
        const double secant = (zs_[j + 1] - zs_[j]) / (ys_[j + 1] - ys_[j]);
        const double a = slopes_[j] / secant, b = slopes_[j + 1] / secant;
        const double r = a * a + b * b;
        if (r > 9.0) {
            const double tau = 3.0 / std::sqrt(r);
            slopes_[j] = tau * a * secant;
            slopes_[j + 1] = tau * b * secant;
        }
    }
}

std::size_t LampertiMap::cell_of(double y) const {
    if (y <= ys_.front()) return 0;
    if (y >= ys_.back()) return ys_.size() - 2;
    return static_cast<std::size_t>(std::upper_bound(ys_.begin(), ys_.end(), y) - ys_.begin()) - 1;
}

double LampertiMap::hermite(std::size_t j, double y) const {
    const double h = ys_[j + 1] - ys_[j];
    const double s = (y - ys_[j]) / h;
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * zs_[j] + (s3 - 2 * s2 + s) * h * slopes_[j] + (-2 * s3 + 3 * s2) * zs_[j + 1] +
           (s3 - s2) * h * slopes_[j + 1];
}

double LampertiMap::hermite_slope(std::size_t j, double y) const {
    const double h = ys_[j + 1] - ys_[j];
    const double s = (y - ys_[j]) / h;
    const double s2 = s * s;
    return (6 * s2 - 6 * s) * zs_[j] / h + (3 * s2 - 4 * s + 1) * slopes_[j] + (-6 * s2 + 6 * s) * zs_[j + 1] / h +
           (3 * s2 - 2 * s) * slopes_[j + 1];
}

double LampertiMap::forward(double y) const {
    if (y < ys_.front() || y > ys_.back()) {
        throw ExtrapolationError("lamperti: y = " + format_double(y) + " outside the working interval");
    }
    return hermite(cell_of(y), y);
}

double LampertiMap::derivative(double y) const {
    if (y < ys_.front() || y > ys_.back()) {
        throw ExtrapolationError("lamperti: y = " + format_double(y) + " outside the working interval");
    }
    return hermite_slope(cell_of(y), y);
}

double LampertiMap::second_derivative(double y) const {
    double ds;
    if (sigma_prime_) {
        ds = sigma_prime_(y);
    } else {
        const double h = 1e-5 * std::max(1.0, std::abs(y));
        ds = (sigma_(y + h) - sigma_(y - h)) / (2.0 * h);
    }
    const double s = sigma_(y);
    return -ds / (s * s);
}

double LampertiMap::inverse(double z) const {
    if (!(z >= zs_.front() && z <= zs_.back())) {
        throw ExtrapolationError("lamperti: z = " + format_double(z) + " outside [" + format_double(zs_.front()) +
                                 ", " + format_double(zs_.back()) + "]");
    }
    std::size_t j = static_cast<std::size_t>(std::upper_bound(zs_.begin(), zs_.end(), z) - zs_.begin());
    j = j == 0 ? 0 : std::min(j - 1, ys_.size() - 2);
    double a = ys_[j], b = ys_[j + 1];
    // Linear first guess, then safeguarded Newton on the monotone cubic.
    double y = a + (b - a) * (z - zs_[j]) / (zs_[j + 1] - zs_[j]);
    for (int it = 0; it < 60; ++it) {
        const double r = hermite(j, y) - z;
        if (r == 0.0) break;
        if (r > 0.0) b = y; else a = y;
        const double slope = hermite_slope(j, y);
        double next = y - r / slope;
        if (!(next > a && next < b)) next = 0.5 * (a + b);
        if (std::abs(next - y) <= 1e-15 * std::max(1.0, std::abs(y))) {
            y = next;
            break;
        }
        y = next;
    }
    return y;
}

double LampertiMap::b_star(double z) const { return b_star_at(inverse(z)); }

double LampertiMap::b_star_at(double y) const {
    const double s = sigma_(y);
    return drift_(y) / s + 0.5 * second_derivative(y) * s * s;
}

DriftField LampertiMap::b_star_field() const {
    DriftField f;
    f.dim = 1;
    auto self = *this;
    f.eval = [self](double, const Vec& x) -> Vec { return scalar_vec(self.b_star(x(0))); };
    f.autonomous = true;
    f.label = "lamperti-b-star";
    return f;
}

double LampertiMap::identity_defect(std::size_t count) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double y = lo() + (hi() - lo()) * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        worst = std::max(worst, std::abs(derivative(y) * sigma_(y) - 1.0));
    }
    return worst;
}

double LampertiMap::roundtrip_defect(std::size_t count) const {
    double worst = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double y = lo() + (hi() - lo()) * (static_cast<double>(i) + 0.5) / static_cast<double>(count);
        worst = std::max(worst, std::abs(inverse(forward(y)) - y));
    }
    return worst;
}

LampertiMap lamperti_transform(ScalarField sigma, ScalarField drift, const LampertiOptions& opts) {
    return LampertiMap(std::move(sigma), std::move(drift), opts);
}

namespace {

template <typename Record>
bool lamperti_path(const LampertiMap& map, double x0, const BrownianEnsemble& ens, std::size_t path,
                   std::vector<double>& inc, Record&& record) {
    ens.path_increments(path, inc);
    const double dt = ens.dt();
    double z = map.forward(x0);
    double y = x0;
    record(std::size_t{0}, x0);
    try {
        for (std::size_t k = 0; k < ens.steps(); ++k) {
            z += map.b_star_at(y) * dt + inc[k];
            y = map.inverse(z);
            record(k + 1, y);
        }
    } catch (const ExtrapolationError&) {
        return false;
    }
    return true;
}

void check_lamperti(const LampertiMap& map, double x0, const BrownianEnsemble& ens) {
    if (ens.dim() != 1) throw DomainError("lamperti: only d = 1 is supported");
    if (!(x0 >= map.lo() && x0 <= map.hi())) throw DomainError("lamperti: x0 outside the working interval");
}

}  // namespace

PathEnsemble simulate_lamperti(const LampertiMap& map, double x0, const BrownianEnsemble& ens) {
    check_lamperti(map, x0, ens);
    PathEnsemble out;
    out.paths = ens.paths();
    out.levels = ens.steps() + 1;
    if (out.paths > ens.memory_budget() / sizeof(double) / out.levels) {
        throw SizingError("simulate_lamperti: path table exceeds the memory budget");
    }
    out.dim = 1;
    out.dt = ens.dt();
    out.x0 = scalar_vec(x0);
    out.drift_label = "lamperti";
    out.states.assign(out.paths * out.levels, 0.0);
    out.log_weight.assign(out.paths, 0.0);
    out.valid.assign(out.paths, 1);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps());
        for (std::size_t i = begin; i < end; ++i) {
            double* row = out.states.data() + i * out.levels;
            out.valid[i] = lamperti_path(map, x0, ens, i, inc, [&](std::size_t k, double x) { row[k] = x; }) ? 1 : 0;
        }
    });
    return out;
}

NodeSamples lamperti_samples(const LampertiMap& map, double x0, const BrownianEnsemble& ens,
                             std::span<const std::size_t> nodes) {
    check_lamperti(map, x0, ens);
    NodeSamples out;
    out.nodes.assign(nodes.begin(), nodes.end());
    out.dim = 1;
    out.paths = ens.paths();
    const std::size_t width = out.nodes.size();
    out.values.assign(out.paths * width, 0.0);
    out.valid.assign(out.paths, 1);
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps());
        for (std::size_t i = begin; i < end; ++i) {
            double* row = out.values.data() + i * width;
            const bool ok = lamperti_path(map, x0, ens, i, inc, [&](std::size_t k, double x) {
                for (std::size_t j = 0; j < width; ++j) {
                    if (out.nodes[j] == k) row[j] = x;
                }
            });
            out.valid[i] = ok ? 1 : 0;
        }
    });
    return out;
}

NodeSamples diffusion_em_samples(const ScalarField& drift, const ScalarField& sigma, double x0,
                                 const BrownianEnsemble& ens, std::span<const std::size_t> nodes) {
    if (ens.dim() != 1) throw DomainError("diffusion_em_samples: only d = 1 is supported");
    NodeSamples out;
    out.nodes.assign(nodes.begin(), nodes.end());
    out.dim = 1;
    out.paths = ens.paths();
    const std::size_t width = out.nodes.size();
    out.values.assign(out.paths * width, 0.0);
    out.valid.assign(out.paths, 1);
    const double dt = ens.dt();
    parallel_for(ens.paths(), [&](std::size_t begin, std::size_t end) {
        std::vector<double> inc(ens.steps());
        for (std::size_t i = begin; i < end; ++i) {
            ens.path_increments(i, inc);
            double* row = out.values.data() + i * width;
            double x = x0;
            for (std::size_t j = 0; j < width; ++j) {
                if (out.nodes[j] == 0) row[j] = x;
            }
            for (std::size_t k = 0; k < ens.steps(); ++k) {
                x += drift(x) * dt + sigma(x) * inc[k];
                if (!std::isfinite(x)) {
                    out.valid[i] = 0;
                    break;
                }
                for (std::size_t j = 0; j < width; ++j) {
                    if (out.nodes[j] == k + 1) row[j] = x;
                }
            }
        }
    });
    return out;
}

}  // namespace zvlab
