#pragma once

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/stats.hpp"

#include <functional>
#include <span>
#include <vector>

namespace zvlab {

using ScalarFn = std::function<double(const Vec&)>;

/// Log-weights above this are treated as overflow and the path is excluded.
inline constexpr double kMaxLogWeight = 700.0;

/// Doleans-Dade exponential of int b(t, x0 + B) dB over the whole horizon,
/// computed on the same increments that drive the driftless paths.
struct WeightSet {
    std::vector<double> log_weights;
    std::vector<double> weights;        ///< 0 for excluded paths
    std::vector<unsigned char> valid;
    std::size_t excluded = 0;
};

WeightSet doleans_weight(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens);

/// Mean of f(x0 + B_t) * W_T: E[f(X_t)] for X solving dX = b dt + dB.
/// Throws EstimationError if every path was excluded.
EstimatorResult girsanov_estimate(const ScalarFn& f, const DriftField& b, const Vec& x0, double t,
                                  const BrownianEnsemble& ens);

/// Plain Monte Carlo E[f(X_t)] over Euler-Maruyama paths.
EstimatorResult em_estimate(const ScalarFn& f, const DriftField& b, const Vec& x0, double t,
                            const BrownianEnsemble& ens);

/// Weighted and direct estimates of several test functions from one pass each.
std::vector<EstimatorResult> girsanov_estimates(std::span<const ScalarFn> fs, const DriftField& b, const Vec& x0,
                                                double t, const BrownianEnsemble& ens);
std::vector<EstimatorResult> em_estimates(std::span<const ScalarFn> fs, const DriftField& b, const Vec& x0,
                                          double t, const BrownianEnsemble& ens);

/// Mean and mean square of the weights (martingale / second-moment checks).
struct WeightMoments {
    EstimatorResult mean;
    EstimatorResult mean_square;
};
WeightMoments weight_moments(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens);

/// E[exp(k int_0^T |b(s, x0 + B_s)|^2 ds)], left-point sums.
EstimatorResult exp_moment_diagnostic(const DriftField& b, double k, const Vec& x0, const BrownianEnsemble& ens);

struct ScalingFit {
    std::vector<double> lags;
    std::vector<double> moments;
    std::vector<double> stderrs;
    Regression fit;  ///< log(moment) against log(lag)
};

/// E[|X_{u+h} - X_u|^4] for each lag h (a multiple of dt), averaged over the
/// non-overlapping windows u = 0, h, 2h, ... and over paths; log-log fit.
ScalingFit fourth_moment_scaling(const DriftField& b, const Vec& x0, const BrownianEnsemble& ens,
                                 std::span<const double> lags);

}  // namespace zvlab
