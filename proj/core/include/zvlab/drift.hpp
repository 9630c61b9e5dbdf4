#pragma once

#include "zvlab/linalg.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace zvlab {

using DriftFn = std::function<Vec(double t, const Vec& x)>;
using DriftGradFn = std::function<Mat(double t, const Vec& x)>;

/// Exact spatial convolution with the unit-mass bump of bandwidth eps.
/// Returns the convolved value and its spatial Jacobian.
using ConvolutionFn = std::function<std::pair<Vec, Mat>(double t, const Vec& x, double eps)>;

/// A time-space vector field b : [0, T] x R^d -> R^d.
///
/// grad(t, x)(i, j) = d b_i / d x_j. When smooth is set, grad is populated and
/// agrees with central differences of eval. When support_radius = R is set,
/// eval vanishes for |x| > R.
struct DriftField {
    int dim = 1;
    DriftFn eval;
    DriftGradFn grad;
    bool smooth = false;
    bool autonomous = false;           ///< eval does not depend on t
    std::optional<double> support_radius;
    std::optional<double> sup_bound;   ///< known bound on |b|, if any
    ConvolutionFn convolve;            ///< optional closed-form mollification
    std::string label;

    Vec operator()(double t, const Vec& x) const { return eval(t, x); }
    bool has_grad() const noexcept { return static_cast<bool>(grad); }

    /// eval with a finiteness check; throws EvaluationError naming (t, x).
    Vec checked(double t, const Vec& x) const;
};

/// Sum of two fields of equal dimension (used by property tests and oracles).
DriftField add(const DriftField& a, const DriftField& b);

/// c * f.
DriftField scale(const DriftField& f, double c);

/// Max |grad - central difference| over sampled points, relative to max(1, |grad|).
double gradient_consistency(const DriftField& f, double t, const Vec& x, double h = 1e-5);

// Presets --------------------------------------------------------------------

DriftField zero_drift(int dim);
DriftField constant_drift(const Vec& mu);
/// b(t, x) = -theta x.
DriftField ou_drift(int dim, double theta = 1.0);
/// b(t, x)_i = amplitude * sign(x_i); sign(0) = 0.
DriftField sign_drift(int dim, double amplitude = 1.0);

/// Drift tabulated on a tensor grid and interpolated multilinearly; zero
/// outside the spatial box, clamped in time.
DriftField grid_drift(const std::filesystem::path& csv, int dim);

/// Builds a preset by name: zero, constant, ou, sign, custom-grid.
/// Parameters (all optional): mu, theta, amplitude, file.
DriftField make_drift(const std::string& name, int dim,
                      const std::map<std::string, std::string>& params = {});

/// Names accepted by make_drift.
const std::vector<std::string>& drift_presets();

}  // namespace zvlab
