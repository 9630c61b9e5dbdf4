#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace zvlab {

/// Monte Carlo estimate of a vector quantity.
struct EstimatorResult {
    std::string name;
    std::vector<double> mean;
    std::vector<double> stderr_;
    std::size_t samples = 0;   ///< paths contributing to the mean
    std::size_t excluded = 0;  ///< paths dropped (overflow, domain exit)
    std::uint64_t seed = 0;
    std::string fingerprint;

    double excluded_fraction() const {
        const auto total = samples + excluded;
        return total == 0 ? 0.0 : static_cast<double>(excluded) / static_cast<double>(total);
    }
};

/// Summarizes a row-major (paths x width) table of per-path values. Rows with
/// keep[i] == 0 are skipped; an empty keep mask keeps every row.
EstimatorResult summarize(std::span<const double> per_path, std::size_t width,
                          std::span<const unsigned char> keep = {});

/// sqrt(a^2 + b^2), the standard error of a difference of independent means.
double combined_stderr(double a, double b);

struct Regression {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares y = intercept + slope * x.
Regression linear_fit(std::span<const double> x, std::span<const double> y);

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
double ks_statistic(std::vector<double> a, std::vector<double> b);

/// Asymptotic critical value c(alpha) * sqrt((m + n) / (m n)).
double ks_critical_value(double alpha, std::size_t m, std::size_t n);

/// FNV-1a 64-bit digest rendered as 16 lowercase hex digits.
std::string fingerprint(std::string_view canonical);

/// Shortest round-trip decimal of v with 17 significant digits, locale-free.
std::string format_double(double v);

}  // namespace zvlab
