#pragma once

#include "zvlab/brownian.hpp"
#include "zvlab/drift.hpp"
#include "zvlab/girsanov.hpp"
#include "zvlab/sde.hpp"
#include "zvlab/stats.hpp"
#include "zvlab/zvonkin.hpp"

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace zvlab {

/// Flow derivative matrices Z (d x d, column-major) per (path, level),
/// started from the identity at level r_node.
struct VariationEnsemble {
    std::size_t paths = 0;
    std::size_t levels = 0;
    int dim = 1;
    double dt = 0.0;
    double r_start = 0.0;
    std::size_t r_node = 0;
    std::vector<double> Z;  ///< (path, level, d*d)
    std::vector<unsigned char> valid;

    Mat at(std::size_t path, std::size_t level) const;
};

/// dZ = grad b(t, X_t) Z dt along each path of the ensemble, Z = I at r_start.
/// Levels before r_start hold zero matrices.
VariationEnsemble first_variation(const DriftField& b, const PathEnsemble& paths, double r_start = 0.0);

/// D_r X_t = Z_t Z_r^{-1} for t >= r, zero for t < r. Throws NumericalError
/// reporting the condition number if Z_r is numerically singular.
VariationEnsemble malliavin_derivative(const VariationEnsemble& var, double r);

/// Weight a on [0, t] with int_0^t a(s) ds = 1.
struct WeightFunction {
    std::string label;
    double t = 1.0;
    std::function<double(double)> a;

    /// Cell averages (1/dt) int_{t_k}^{t_{k+1}} a(s) ds for k < steps.
    std::vector<double> cell_weights(double dt, std::size_t steps) const;
};

/// Checks the normalization by adaptive quadrature; throws DomainError.
void validate_weight(const WeightFunction& w, double tolerance = 1e-8);

/// constant (1/t), front (2(t - s)/t^2), back (2s/t^2).
WeightFunction make_weight(const std::string& name, double t);
const std::vector<std::string>& weight_presets();

struct Payoff {
    std::string label;
    ScalarFn phi;
    std::function<Vec(const Vec&)> dphi;  ///< optional gradient
    bool bounded = false;

    double operator()(const Vec& x) const { return phi(x); }
    bool has_grad() const noexcept { return static_cast<bool>(dphi); }
};

/// identity (x_1), square (|x|^2), tanh (tanh x_1), constant (value c).
Payoff make_payoff(const std::string& name, const std::map<std::string, std::string>& params = {});
const std::vector<std::string>& payoff_presets();

/// Max |dphi - central difference| at x.
double payoff_gradient_consistency(const Payoff& p, const Vec& x, double h = 1e-5);

/// Bismut-Elworthy-Li estimator of grad_x E[phi(X_t^x)]: per path
/// phi(X_t) sum_k a_k Z_{t_k}^T dB_k, one result per weight from a single pass.
std::vector<EstimatorResult> bel_gradients(const Payoff& phi, const DriftField& b, const Vec& x0, double t,
                                           std::span<const WeightFunction> weights, const BrownianEnsemble& ens);
EstimatorResult bel_gradient(const Payoff& phi, const DriftField& b, const Vec& x0, double t,
                             const WeightFunction& a, const BrownianEnsemble& ens);

/// Central differences of E[phi(X_t^{x0 +- h e_i})] with common random numbers.
EstimatorResult fd_gradient_oracle(const Payoff& phi, const DriftField& b, const Vec& x0, double t, double h,
                                   const BrownianEnsemble& ens);

/// Mean of Z_t^T grad phi(X_t).
EstimatorResult pathwise_gradient(const Payoff& phi, const DriftField& b, const Vec& x0, double t,
                                  const BrownianEnsemble& ens);

struct HolderPair {
    double r = 0.0;
    double r_prime = 0.0;
    double msd = 0.0;     ///< E ||D_{r'} X_t - D_r X_t||_F^2
    double stderr_ = 0.0;
};

struct HolderScan {
    std::vector<double> r_grid;
    std::vector<HolderPair> pairs;
    Regression fit;             ///< log msd against log |r' - r|
    bool degenerate_zero = false;
    std::vector<double> moments;  ///< E ||D_r X_t||_F^2 per r in r_grid
    double moment_max = 0.0;
    std::size_t excluded = 0;
};

/// r_grid = {c} u {c + c 2^-m, m = 1..levels} with c = t/2, snapped to nodes.
std::vector<double> default_r_grid(double t, double dt, int levels = 9);

/// Monte Carlo E||D_{r'}X_t - D_rX_t||^2 over all pairs of r_grid and a
/// log-log fit. All-zero differences set degenerate_zero and skip the fit.
HolderScan holder_scan(const DriftField& b, const Vec& x0, double t, std::span<const double> r_grid,
                       const BrownianEnsemble& ens);

/// E[exp(alpha V_T)], V_T = sum_k ||hess U(t_k, X_k) (I + grad U(t_k, X_k))^{-1}||_F^2 dt
/// along recovered paths X. Paths with alpha V_T > kMaxLogWeight are excluded.
EstimatorResult v_exponential_moment(const ZvonkinSolution& sol, const PathEnsemble& paths, double alpha);

/// Rows method,axis,mean,stderr,M,dt,h,weight,seed.
struct GradientRow {
    std::string method;
    double h = 0.0;
    std::string weight;
    EstimatorResult result;
};
CsvTable gradient_table(std::span<const GradientRow> rows, double dt);

/// Rows r,r_prime,msd,fit_slope,fit_r2.
CsvTable holder_table(const HolderScan& scan);

}  // namespace zvlab
