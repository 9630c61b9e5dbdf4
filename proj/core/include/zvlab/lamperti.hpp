#pragma once

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/sde.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace zvlab {

using ScalarField = std::function<double(double)>;

struct LampertiOptions {
    double lo = 0.1;                ///< working interval [lo, hi]
    double hi = 10.0;
    std::optional<double> y0;       ///< base point; defaults to the interval midpoint
    std::size_t table_points = 10000;
    double sigma_min = 1e-8;
    ScalarField sigma_prime;        ///< optional; central differences otherwise
};

/// One-dimensional Lamperti map Lambda(y) = int_{y0}^y dz / sigma(z), tabulated
/// on nodes equispaced in Lambda and interpolated by cubic Hermite pieces with
/// the exact slopes 1/sigma. The transformed drift is
/// b_*(z) = Lambda'(y) b(y) + 1/2 Lambda''(y) sigma(y)^2, y = Lambda^{-1}(z).
class LampertiMap {
public:
    LampertiMap(ScalarField sigma, ScalarField drift, const LampertiOptions& opts);

    double forward(double y) const;
    /// Throws ExtrapolationError outside [forward(lo), forward(hi)].
    double inverse(double z) const;
    /// Derivative of the tabulated interpolant.
    double derivative(double y) const;
    /// -sigma'(y) / sigma(y)^2.
    double second_derivative(double y) const;
    double b_star(double z) const;
    /// b_* at z = Lambda(y), skipping the inversion.
    double b_star_at(double y) const;

    double lo() const noexcept { return ys_.front(); }
    double hi() const noexcept { return ys_.back(); }
    double z_lo() const noexcept { return zs_.front(); }
    double z_hi() const noexcept { return zs_.back(); }
    double base_point() const noexcept { return y0_; }
    const ScalarField& sigma() const noexcept { return sigma_; }
    const ScalarField& drift() const noexcept { return drift_; }

    /// b_* as a one-dimensional DriftField.
    DriftField b_star_field() const;

    /// max |Lambda'(y) sigma(y) - 1| over count equispaced points.
    double identity_defect(std::size_t count = 1000) const;
    /// max |Lambda^{-1}(Lambda(y)) - y| over count equispaced points.
    double roundtrip_defect(std::size_t count = 1000) const;

private:
    double hermite(std::size_t j, double y) const;
    double hermite_slope(std::size_t j, double y) const;
    std::size_t cell_of(double y) const;

    ScalarField sigma_;
    ScalarField drift_;
    ScalarField sigma_prime_;
    double y0_ = 0.0;
    std::vector<double> ys_;
    std::vector<double> zs_;
    std::vector<double> slopes_;
};

/// Throws DomainError if sigma drops below sigma_min on the interval.
LampertiMap lamperti_transform(ScalarField sigma, ScalarField drift, const LampertiOptions& opts = {});

/// Z_{k+1} = Z_k + b_*(Z_k) dt + dB_k from Z_0 = Lambda(x0); X = Lambda^{-1}(Z).
/// Paths leaving the tabulated range are marked invalid.
PathEnsemble simulate_lamperti(const LampertiMap& map, double x0, const BrownianEnsemble& ens);
NodeSamples lamperti_samples(const LampertiMap& map, double x0, const BrownianEnsemble& ens,
                             std::span<const std::size_t> nodes);

/// Direct Euler-Maruyama of dX = b(X) dt + sigma(X) dB (d = 1).
NodeSamples diffusion_em_samples(const ScalarField& drift, const ScalarField& sigma, double x0,
                                 const BrownianEnsemble& ens, std::span<const std::size_t> nodes);

}  // namespace zvlab
