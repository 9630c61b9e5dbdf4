#include "zvlab/stats.hpp"

#include "zvlab/error.hpp"
#include "zvlab/linalg.hpp"
#include "zvlab/parallel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

namespace zvlab {

double operator_norm(const Mat& m) {
    if (m.rows() == 1 && m.cols() == 1) return std::abs(m(0, 0));
    if (m.rows() == 2 && m.cols() == 2) {
        // Largest eigenvalue of m^T m in closed form.
        const double a = m(0, 0), b = m(0, 1), c = m(1, 0), d = m(1, 1);
        const double s1 = a * a + b * b + c * c + d * d;
        const double det = a * d - b * c;
        const double disc = std::sqrt(std::max(0.0, s1 * s1 - 4.0 * det * det));
        return std::sqrt(0.5 * (s1 + disc));
    }
    const Eigen::MatrixXd dense = m;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(dense);
    return svd.singularValues()(0);
}

EstimatorResult summarize(std::span<const double> per_path, std::size_t width,
                          std::span<const unsigned char> keep) {
    if (width == 0) throw DomainError("summarize: width must be positive");
    const std::size_t rows = per_path.size() / width;
    if (!keep.empty() && keep.size() != rows) throw DomainError("summarize: mask size mismatch");

    EstimatorResult out;
    std::vector<double> kept;
    std::size_t n = rows;
    if (!keep.empty()) {
        n = static_cast<std::size_t>(std::count_if(keep.begin(), keep.end(),
                                                   [](unsigned char k) { return k != 0; }));
        kept.reserve(n * width);
        for (std::size_t i = 0; i < rows; ++i) {
            if (keep[i] == 0) continue;
            kept.insert(kept.end(), per_path.begin() + static_cast<std::ptrdiff_t>(i * width),
                        per_path.begin() + static_cast<std::ptrdiff_t>((i + 1) * width));
        }
        per_path = kept;
    }
    out.samples = n;
    out.excluded = rows - n;
    if (n == 0) throw EstimationError("summarize: no samples left after exclusion");

    out.mean.resize(width);
    out.stderr_.resize(width);
    std::vector<double> dev(n);
    for (std::size_t c = 0; c < width; ++c) {
        const double mean = pairwise_sum_strided(per_path, n, width, c) / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double e = per_path[i * width + c] - mean;
            dev[i] = e * e;
        }
        const double var = n > 1 ? pairwise_sum(dev) / static_cast<double>(n - 1) : 0.0;
        out.mean[c] = mean;
        out.stderr_[c] = std::sqrt(var / static_cast<double>(n));
    }
    return out;
}

double combined_stderr(double a, double b) { return std::hypot(a, b); }

Regression linear_fit(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("linear_fit: need >= 2 paired points");
    const auto n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("linear_fit: degenerate abscissae");
    Regression r;
    r.slope = sxy / sxx;
    r.intercept = my - r.slope * mx;
    r.r2 = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    r.points = x.size();
    return r;
}

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    if (a.empty() || b.empty()) throw DomainError("ks_statistic: empty sample");
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const auto na = static_cast<double>(a.size());
    const auto nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double v = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= v) ++i;
        while (j < b.size() && b[j] <= v) ++j;
        d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_critical_value(double alpha, std::size_t m, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("ks_critical_value: alpha must lie in (0,1)");
    const double c = std::sqrt(-0.5 * std::log(alpha / 2.0));
    const auto dm = static_cast<double>(m), dn = static_cast<double>(n);
    return c * std::sqrt((dm + dn) / (dm * dn));
}

std::string fingerprint(std::string_view canonical) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char ch : canonical) {
        h ^= ch;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    if (ec != std::errc()) throw IoError("format_double: conversion failed");
    return std::string(buf, ptr);
}

}  // namespace zvlab
